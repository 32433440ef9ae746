import numpy as np
import pytest

from gestalteval.store import EmbeddingDataset, ImageRecord


def make_dataset(n_classes=5, per_class=20, dim=4, patches=5, seed=0, scale=1.0):
    """A plain random dataset with no generative structure, for plumbing tests."""
    rng = np.random.default_rng(seed)
    records = []
    rid = 0
    for c in range(n_classes):
        for _ in range(per_class):
            records.append(
                ImageRecord(
                    rid,
                    c,
                    rng.normal(scale=scale, size=dim).astype(np.float32),
                    rng.normal(scale=scale, size=(patches, dim)).astype(np.float32),
                )
            )
            rid += 1
    names = [f"class_{c}" for c in range(n_classes)]
    return EmbeddingDataset(dim, names, records, provenance="test").validate()


@pytest.fixture
def small_dataset():
    return make_dataset()

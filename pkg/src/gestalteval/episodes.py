"""N-way K-shot Q-query episode construction with positional seeding.

Every episode (group g, index i) gets its own generator derived purely from
(master_seed, g, i) via numpy's SeedSequence spawn keys, so any subset of
episodes can be regenerated independently and in parallel without changing
its contents. A second stream per episode, tagged EVAL_STREAM, is reserved
for evaluation-time patch subsampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError
from .store import EmbeddingDataset

SAMPLE_STREAM = 0
EVAL_STREAM = 1


def subseed_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for a positional child stream of ``master_seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=key)))


@dataclass(frozen=True)
class EpisodeSpec:
    """Shape of the evaluation: N-way, K-shot, Q queries, grouped episodes."""

    n_way: int = 5
    k_shot: int = 1
    q_query: int = 15
    groups: int = 5
    episodes_per_group: int = 2000

    def __post_init__(self):
        for name in ("n_way", "k_shot", "q_query", "groups", "episodes_per_group"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class Episode:
    """One task: sampled classes with disjoint support/query record positions.

    ``class_indices`` has shape (N,) in draw order; ``support`` (N, K) and
    ``query`` (N, Q) hold positions into the dataset's record list, grouped
    by class in the same order.
    """

    class_indices: np.ndarray
    support: np.ndarray
    query: np.ndarray


def _check_capacity(dataset: EmbeddingDataset, spec: EpisodeSpec) -> tuple[list[np.ndarray], list[int]]:
    by_class = dataset.records_by_class()
    populated = [c for c, recs in enumerate(by_class) if len(recs) > 0]
    if len(populated) < spec.n_way:
        raise CapacityError(
            f"dataset has {len(populated)} populated classes, need {spec.n_way}"
        )
    need = spec.k_shot + spec.q_query
    for c in populated:
        if len(by_class[c]) < need:
            raise CapacityError(
                f"class {dataset.class_names[c]!r} has {len(by_class[c])} records, "
                f"need {need} (K+Q)"
            )
    return [by_class[c] for c in populated], populated


def sample_episode(dataset: EmbeddingDataset, spec: EpisodeSpec, rng: np.random.Generator) -> Episode:
    """Draw one episode: N classes, then K+Q records per class, all uniform
    without replacement. The first K records of each class form the support.
    """
    class_records, populated = _check_capacity(dataset, spec)
    order = rng.permutation(len(populated))[: spec.n_way]
    chosen = np.asarray([populated[i] for i in order], dtype=np.int64)
    need = spec.k_shot + spec.q_query
    support = np.empty((spec.n_way, spec.k_shot), dtype=np.int64)
    query = np.empty((spec.n_way, spec.q_query), dtype=np.int64)
    for row, class_pos in enumerate(order):
        picks = class_records[class_pos][rng.permutation(len(class_records[class_pos]))[:need]]
        support[row] = picks[: spec.k_shot]
        query[row] = picks[spec.k_shot :]
    return Episode(chosen, support, query)


def episode_at(dataset: EmbeddingDataset, spec: EpisodeSpec, master_seed: int, group: int, index: int) -> Episode:
    """The episode at position (group, index), independent of any other."""
    return sample_episode(dataset, spec, subseed_rng(master_seed, group, index, SAMPLE_STREAM))


def eval_rng_at(master_seed: int, group: int, index: int) -> np.random.Generator:
    """Patch-subsampling stream for the episode at (group, index)."""
    return subseed_rng(master_seed, group, index, EVAL_STREAM)


def sample_groups(dataset: EmbeddingDataset, spec: EpisodeSpec, master_seed: int) -> list[list[Episode]]:
    """All groups of episodes under the positional seeding contract."""
    _check_capacity(dataset, spec)
    return [
        [episode_at(dataset, spec, master_seed, g, i) for i in range(spec.episodes_per_group)]
        for g in range(spec.groups)
    ]

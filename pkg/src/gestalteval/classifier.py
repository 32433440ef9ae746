"""Prototype construction and nearest-prototype softmax classification.

Prototypes are class means in embedding space: the mean of totality
embeddings, the pooled mean of all selected patch embeddings, or their
per-dimension blend (sharing the estimator's fuse arithmetic). A query is
scored by softmax over negative distances, computed with max subtraction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .estimator import LambdaDiag, fuse
from .store import ImageRecord, subsample_patches

SQEUCLID = "sqeuclid"
COSINE = "cosine"
METRICS = (SQEUCLID, COSINE)

NLL_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Prototype:
    """A class representative vector in embedding space."""

    class_index: int
    vector: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or not np.isfinite(vec).all():
            raise ConfigError("prototype vector must be 1-D and finite")
        object.__setattr__(self, "vector", vec)


def totality_prototype(supports: Sequence[ImageRecord]) -> Prototype:
    """Mean of the support images' totality embeddings."""
    if not supports:
        raise ConfigError("support set is empty")
    classes = {rec.class_index for rec in supports}
    if len(classes) != 1:
        raise ConfigError(f"support records span classes {sorted(classes)}")
    stack = np.stack([rec.totality for rec in supports]).astype(np.float64)
    return Prototype(supports[0].class_index, stack.mean(axis=0))


def closure_prototype(supports: Sequence[ImageRecord], m: int, rng: np.random.Generator) -> Prototype:
    """Pooled mean over all K*m selected patch embeddings of one class.

    The pool is flat: every selected patch weighs equally, which matches a
    per-image mean only because each image contributes the same count.
    """
    if not supports:
        raise ConfigError("support set is empty")
    classes = {rec.class_index for rec in supports}
    if len(classes) != 1:
        raise ConfigError(f"support records span classes {sorted(classes)}")
    pool = np.concatenate([subsample_patches(rec, m, rng) for rec in supports]).astype(np.float64)
    return Prototype(supports[0].class_index, pool.mean(axis=0))


def fused_prototype(pt: Prototype, pc: Prototype, lam: LambdaDiag) -> Prototype:
    """Per-dimension convex combination of totality and closure prototypes."""
    if pt.class_index != pc.class_index:
        raise ConfigError(f"class mismatch: {pt.class_index} vs {pc.class_index}")
    return Prototype(pt.class_index, fuse(pt.vector, pc.vector, lam))


def distance(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    """Distance between two feature vectors under the named metric."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if metric == SQEUCLID:
        d = a - b
        return float(d @ d)
    if metric == COSINE:
        na = math.sqrt(float(a @ a))
        nb = math.sqrt(float(b @ b))
        if na == 0.0 or nb == 0.0:
            raise ConfigError("cosine distance undefined for a zero vector")
        return 1.0 - float(a @ b) / (na * nb)
    raise ConfigError(f"unknown metric {metric!r}")


def classify(query: np.ndarray, prototypes: Sequence[Prototype], metric: str = SQEUCLID):
    """Softmax over negative distances to each prototype.

    Returns (predicted class_index, probability vector aligned with the
    prototype sequence). Ties go to the lowest class_index.
    """
    if len(prototypes) < 2:
        raise ConfigError(f"need at least 2 prototypes, got {len(prototypes)}")
    classes = [p.class_index for p in prototypes]
    if len(set(classes)) != len(classes):
        raise ConfigError("prototypes must cover distinct classes")

    dists = np.asarray([distance(query, p.vector, metric) for p in prototypes])
    logits = -dists
    shifted = logits - logits.max()
    weights = np.exp(shifted)
    probs = weights / weights.sum()

    best = 0
    for i in range(1, len(prototypes)):
        if probs[i] > probs[best] or (probs[i] == probs[best] and classes[i] < classes[best]):
            best = i
    return classes[best], probs


def nll(probabilities: np.ndarray, true_class_position: int) -> float:
    """Negative log probability of the true class, floored at 1e-300.

    A floored (zero) probability triggers a RuntimeWarning; the value is
    reported as a diagnostic only.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    p = float(probs[true_class_position])
    if p < NLL_FLOOR:
        warnings.warn(
            f"probability {p} below floor {NLL_FLOOR}; NLL clamped", RuntimeWarning, stacklevel=2
        )
        p = NLL_FLOOR
    return -math.log(p)

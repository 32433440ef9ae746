"""Totality/closure feature estimates and their inverse-variance fusion.

Two observers of the same latent image feature: the whole-image embedding
(totality) and the mean of patch embeddings (closure, the Gaussian MLE of
the latent mean). They are blended per dimension by a diagonal weight

    fused_i = closure_i + lambda_i * (totality_i - closure_i)

with lambda_i in [0, 1]. When the observer error variances are known, the
error-trace-minimizing weight is lambda_i = var_c,i / (var_t,i + var_c,i),
the diagonal inverse-variance rule; under the iid patch model with M
patches this is exactly 1/(M+1). All arithmetic here is float64 regardless
of storage precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DegenerateObserverError
from .store import ImageRecord, subsample_patches


@dataclass(frozen=True)
class LambdaDiag:
    """Diagonal fusion weight: a scalar broadcast over D, or D entries."""

    entries: Union[float, Sequence[float]]

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.entries, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise ConfigError("lambda must be a scalar or a 1-D sequence")
        if not np.isfinite(arr).all() or (arr < 0.0).any() or (arr > 1.0).any():
            raise ConfigError(f"lambda entries must lie in [0, 1], got {arr}")
        normalized = float(arr[0]) if arr.size == 1 else tuple(float(x) for x in arr)
        object.__setattr__(self, "entries", normalized)

    def vector(self, dim: int) -> np.ndarray:
        """The weight as a (dim,) float64 vector."""
        arr = np.atleast_1d(np.asarray(self.entries, dtype=np.float64))
        if arr.size == 1:
            return np.full(dim, arr[0])
        if arr.size != dim:
            raise ConfigError(f"lambda has {arr.size} entries, dimension is {dim}")
        return arr.copy()

    @property
    def is_one(self) -> bool:
        return bool(np.all(np.asarray(self.entries, dtype=np.float64) == 1.0))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(np.asarray(self.entries, dtype=np.float64) == 0.0))


@dataclass(frozen=True, eq=False)
class CovarianceDiag:
    """Diagonal covariance: per-dimension variances, nonnegative and finite."""

    variances: Sequence[float]

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.variances, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise ConfigError("variances must form a 1-D sequence")
        if not np.isfinite(arr).all() or (arr < 0.0).any():
            raise ConfigError("variances must be finite and >= 0")
        object.__setattr__(self, "variances", arr)

    @classmethod
    def isotropic(cls, dim: int, variance: float) -> "CovarianceDiag":
        return cls(np.full(dim, float(variance)))

    @property
    def dim(self) -> int:
        return self.variances.size

    @property
    def trace(self) -> float:
        return float(self.variances.sum())

    def scaled(self, factor: float) -> "CovarianceDiag":
        return CovarianceDiag(self.variances * factor)


def totality_estimate(record: ImageRecord) -> np.ndarray:
    """The whole-image embedding, unchanged, as float64."""
    return record.totality.astype(np.float64)


def closure_estimate(patches) -> np.ndarray:
    """Arithmetic mean of patch embeddings: the MLE of the latent mean
    under the Gaussian patch model."""
    arr = np.asarray(patches, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ConfigError("closure estimate needs at least one patch")
    return arr.mean(axis=0)


def fuse(mu_t: np.ndarray, mu_c: np.ndarray, lam: LambdaDiag) -> np.ndarray:
    """Blend the two observations per dimension.

    Exact at the endpoints: dimensions with weight 1 return the totality
    entry bitwise, weight 0 the closure entry, so the blend never perturbs
    an observer it fully trusts.
    """
    t = np.asarray(mu_t, dtype=np.float64)
    c = np.asarray(mu_c, dtype=np.float64)
    if t.shape != c.shape:
        raise ConfigError(f"dimension mismatch: {t.shape} vs {c.shape}")
    lv = lam.vector(t.shape[-1])
    return np.where(lv == 1.0, t, np.where(lv == 0.0, c, c + lv * (t - c)))


def optimal_lambda(sigma_t: CovarianceDiag, sigma_c: CovarianceDiag) -> LambdaDiag:
    """Error-trace-minimizing diagonal weight for two unbiased observers.

    Per dimension: var_c / (var_t + var_c). A dimension where both
    variances vanish has two exact observations and no well-posed blend.
    """
    vt, vc = sigma_t.variances, sigma_c.variances
    if vt.shape != vc.shape:
        raise ConfigError(f"dimension mismatch: {vt.shape} vs {vc.shape}")
    degenerate = (vt == 0.0) & (vc == 0.0)
    if degenerate.any():
        dims = np.flatnonzero(degenerate)
        raise DegenerateObserverError(
            f"both observer variances are zero in dimensions {dims.tolist()}"
        )
    return LambdaDiag(vc / (vt + vc))


@dataclass(frozen=True)
class FusionConfig:
    """How features are estimated during evaluation.

    ``apply_support``/``apply_query`` switch the blend on for prototypes and
    query features independently; an off side behaves as weight 1 (totality
    only). ``patches_m`` patches are subsampled per record on active sides.
    """

    lam: LambdaDiag = field(default_factory=lambda: LambdaDiag(0.5))
    patches_m: int = 5
    apply_support: bool = True
    apply_query: bool = True
    metric: str = "sqeuclid"
    normalize: bool = False

    def __post_init__(self):
        if self.metric not in ("sqeuclid", "cosine"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        needs_patches = (self.apply_support or self.apply_query) and not self.lam.is_one
        if needs_patches and self.patches_m < 1:
            raise ConfigError("patches_m must be >= 1 when fusion is active")

    def effective_lambda(self, side_applied: bool) -> LambdaDiag | None:
        """None when the side reduces to the totality-only shortcut."""
        if not side_applied or self.lam.is_one:
            return None
        return self.lam


def estimate_feature(record: ImageRecord, config: FusionConfig, rng: np.random.Generator) -> np.ndarray:
    """Estimate one image's feature under ``config``.

    Dispatches totality-only (weight 1, no patches touched), closure-only
    (weight 0), or the blend of both, subsampling ``patches_m`` patches for
    the closure branch.
    """
    if config.lam.is_one:
        return totality_estimate(record)
    closure = closure_estimate(subsample_patches(record, config.patches_m, rng))
    if config.lam.is_zero:
        return closure
    return fuse(totality_estimate(record), closure, config.lam)

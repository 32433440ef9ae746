"""Synthetic Gaussian image model and brute-force validators.

The generative assumption under test: every image has a latent mean
feature, and both the whole-image embedding and each patch embedding are
independent draws from a Gaussian centered on it. Datasets generated here
carry their latent means in a JSON-lines sidecar so estimators can be
scored against ground truth, and a grid search over the fusion weight
provides the brute-force counterpart to the closed-form optimum.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .episodes import subseed_rng
from .errors import ConfigError, DataError
from .estimator import CovarianceDiag
from .store import EmbeddingDataset, ImageRecord

# Positional stream tags under the model seed.
_DATASET_STREAM = 0
_GRID_STREAM = 1


@dataclass(frozen=True, eq=False)
class GaussianImageModel:
    """Class means plus image-level scatter and patch noise, all diagonal.

    Per image of class n: latent mean ~ N(class_mean_n, class_spread); the
    totality embedding and every patch are then independent draws centered
    on it. By default the totality is one more sample of the patch
    distribution (the iid patch model); setting ``totality_cov`` decouples
    the two observers, which is how real extractors behave.
    """

    dim: int
    class_means: np.ndarray
    class_spread: CovarianceDiag
    patch_cov: CovarianceDiag
    seed: int = 0
    totality_cov: CovarianceDiag | None = None

    def __post_init__(self):
        means = np.asarray(self.class_means, dtype=np.float64)
        if means.ndim != 2 or means.shape[1] != self.dim:
            raise ConfigError(f"class_means must have shape (C, {self.dim})")
        if means.shape[0] >= 2:
            for i in range(means.shape[0]):
                for j in range(i + 1, means.shape[0]):
                    if np.array_equal(means[i], means[j]):
                        raise ConfigError(f"class means {i} and {j} are identical")
        if self.totality_cov is None:
            object.__setattr__(self, "totality_cov", self.patch_cov)
        for cov in (self.class_spread, self.patch_cov, self.totality_cov):
            if cov.dim != self.dim:
                raise ConfigError("covariance dimension does not match model dimension")
        object.__setattr__(self, "class_means", means)

    @property
    def n_classes(self) -> int:
        return self.class_means.shape[0]


@dataclass(frozen=True, eq=False)
class ErrorDiagnostics:
    """Per-dimension bias and variance of estimate-vs-truth errors."""

    empirical_bias: np.ndarray
    empirical_cov: CovarianceDiag
    trace: float


def generate_dataset(
    model: GaussianImageModel, images_per_class: int, patches_per_image: int
) -> tuple[EmbeddingDataset, np.ndarray]:
    """Sample a dataset from the model, deterministically under its seed.

    Returns (dataset, truths) where truths[r] is record r's latent mean;
    the dataset stores embeddings as float32, the truths stay float64.
    """
    if images_per_class < 1 or patches_per_image < 0:
        raise ConfigError("images_per_class must be >= 1 and patches_per_image >= 0")
    rng = subseed_rng(model.seed, _DATASET_STREAM)
    spread_sd = np.sqrt(model.class_spread.variances)
    patch_sd = np.sqrt(model.patch_cov.variances)
    tot_sd = np.sqrt(model.totality_cov.variances)

    records = []
    truths = []
    next_id = 0
    for c in range(model.n_classes):
        mus = model.class_means[c] + rng.standard_normal((images_per_class, model.dim)) * spread_sd
        tots = mus + rng.standard_normal((images_per_class, model.dim)) * tot_sd
        pats = (
            mus[:, None, :]
            + rng.standard_normal((images_per_class, patches_per_image, model.dim)) * patch_sd
        )
        for i in range(images_per_class):
            records.append(
                ImageRecord(next_id, c, tots[i].astype(np.float32), pats[i].astype(np.float32))
            )
            truths.append(mus[i])
            next_id += 1

    names = [f"class_{c}" for c in range(model.n_classes)]
    dataset = EmbeddingDataset(model.dim, names, records, provenance="synthetic").validate()
    return dataset, np.asarray(truths)


def write_truth_sidecar(path, dataset: EmbeddingDataset, truths: np.ndarray) -> None:
    """Record the latent means as JSON lines: {"record_id": ..., "mean": [...]}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec, mu in zip(dataset.records, truths):
            fh.write(json.dumps({"record_id": rec.record_id, "mean": mu.tolist()}) + "\n")


def read_truth_sidecar(path) -> dict[int, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return {int(r["record_id"]): np.asarray(r["mean"], dtype=np.float64) for r in rows}


def simulate_fusion_errors(
    model: GaussianImageModel, m: int, trials: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``trials`` images and return (totality - truth, closure - truth).

    The closure observation is the mean of ``m`` fresh patches; both error
    arrays have shape (trials, D). The latent means themselves cancel out
    of fusion errors, so class structure is irrelevant here.
    """
    if m < 1 or trials < 1:
        raise ConfigError("m and trials must be >= 1")
    patch_sd = np.sqrt(model.patch_cov.variances)
    tot_err = rng.standard_normal((trials, model.dim)) * np.sqrt(model.totality_cov.variances)
    clo_err = (rng.standard_normal((trials, m, model.dim)) * patch_sd).mean(axis=1)
    return tot_err, clo_err


def grid_search_lambda(
    model: GaussianImageModel,
    m: int,
    grid,
    trials: int,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Brute-force the fusion weight on simulated images.

    Shares one set of ``trials`` simulated images across the whole grid
    (common random numbers), evaluates the mean squared estimation error
    at each grid value, and returns (argmin weight, error-trace curve).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 1 or (grid < 0.0).any() or (grid > 1.0).any():
        raise ConfigError("grid values must lie in [0, 1]")
    if trials < 1000:
        raise ConfigError(f"trials must be >= 1000, got {trials}")
    if rng is None:
        rng = subseed_rng(model.seed, _GRID_STREAM)

    tot_err, clo_err = simulate_fusion_errors(model, m, trials, rng)
    traces = np.empty(grid.size)
    for g, lam in enumerate(grid):
        fused_err = clo_err + lam * (tot_err - clo_err)
        traces[g] = np.mean(np.sum(fused_err * fused_err, axis=1))
    return float(grid[int(np.argmin(traces))]), traces


def observer_error_trace(
    sigma_t: CovarianceDiag,
    sigma_c: CovarianceDiag,
    lam: np.ndarray,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Empirical error trace for two synthetic observers blended at ``lam``.

    Simulates the abstract observer pair directly (errors drawn from the
    given diagonal covariances) rather than the image model; ``lam`` may be
    scalar or per-dimension.
    """
    et = rng.standard_normal((trials, sigma_t.dim)) * np.sqrt(sigma_t.variances)
    ec = rng.standard_normal((trials, sigma_c.dim)) * np.sqrt(sigma_c.variances)
    fused_err = ec + np.asarray(lam, dtype=np.float64) * (et - ec)
    return float(np.mean(np.sum(fused_err * fused_err, axis=1)))


def empirical_error_diagnostics(estimates, truths) -> ErrorDiagnostics:
    """Per-dimension bias (mean of estimate - truth) and sample variance."""
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    if est.shape != tru.shape:
        raise DataError(f"length mismatch: {est.shape} vs {tru.shape}")
    if est.ndim != 2 or est.shape[0] < 2:
        raise DataError("need at least 2 estimate/truth pairs")
    err = est - tru
    cov = CovarianceDiag(err.var(axis=0, ddof=1))
    return ErrorDiagnostics(err.mean(axis=0), cov, cov.trace)


def intra_class_variance(groups) -> float:
    """Mean over classes of the trace of the within-class sample covariance.

    ``groups`` maps class labels to (n_i, D) feature arrays (or is a plain
    sequence of such arrays). Classes with fewer than 2 features are
    skipped with a warning; if none remain, that is an error.
    """
    arrays = list(groups.values()) if hasattr(groups, "values") else list(groups)
    traces = []
    for arr in arrays:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape[0] < 2:
            warnings.warn(
                f"class with {arr.shape[0]} feature(s) excluded from intra-class variance",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        traces.append(float(arr.var(axis=0, ddof=1).sum()))
    if not traces:
        raise DataError("no class has at least 2 features")
    return float(np.mean(traces))


def gaussian_log_likelihood(patches, mean, cov: CovarianceDiag) -> float:
    """Log-likelihood of iid diagonal-Gaussian patches at the given mean.

    Uses the standard multivariate normal density. Zero-variance
    dimensions are rejected.
    """
    arr = np.asarray(patches, dtype=np.float64)
    mu = np.asarray(mean, dtype=np.float64)
    var = cov.variances
    if (var == 0.0).any():
        raise ConfigError("log-likelihood undefined for zero variance")
    m, d = arr.shape
    quad = np.sum((arr - mu) ** 2 / var)
    return float(-0.5 * m * d * np.log(2 * np.pi) - 0.5 * m * np.log(var).sum() - 0.5 * quad)

"""End-to-end episodic evaluation, ablations, sweeps, and reports.

A run walks every (group, episode) position, regenerates the episode and
its patch-subsampling stream from the master seed, gathers float64 arrays,
and hands them to the selected kernel backend. Aggregation uses exact
integer counting for accuracy and a fixed reduction order for floats, so
identical inputs yield byte-identical canonical JSON reports.

Patch draws depend only on (master_seed, group, index) and the record
order within the episode, never on the blend weight, so sweep points share
common random numbers; with a fixed stored patch count, smaller subsample
sizes select nested prefixes of one permutation per record.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from . import core
from .episodes import Episode, EpisodeSpec, episode_at, eval_rng_at, subseed_rng
from .errors import CapacityError, ConfigError
from .estimator import FusionConfig, LambdaDiag, estimate_feature
from .oracle import intra_class_variance
from .store import EmbeddingDataset, draw_patch_indices

_METRIC_KIND = {"sqeuclid": 0, "cosine": 1}

# Stream tag for variance_report's record-level feature estimation.
_VARIANCE_STREAM = 2

CI_DEFINITION = "1.96*sd(ddof=1)/sqrt(groups)"


@dataclass(frozen=True)
class EvalReport:
    """Accuracy statistics for one evaluation run."""

    per_group_accuracy: list[float]
    mean_accuracy: float
    ci95: float
    mean_nll: float
    total_queries: int
    spec: EpisodeSpec
    config: FusionConfig
    seed: int
    backend: str
    dataset_info: dict
    episode_stream_hash: str

    def to_dict(self) -> dict:
        lam = self.config.lam.entries
        return {
            "schema": "gestalteval-report-v1",
            "per_group_accuracy": self.per_group_accuracy,
            "mean_accuracy": self.mean_accuracy,
            "ci95": self.ci95,
            "ci_definition": CI_DEFINITION,
            "mean_nll": self.mean_nll,
            "total_queries": self.total_queries,
            "n_way": self.spec.n_way,
            "k_shot": self.spec.k_shot,
            "q_query": self.spec.q_query,
            "groups": self.spec.groups,
            "episodes_per_group": self.spec.episodes_per_group,
            "config": {
                "lambda": list(lam) if isinstance(lam, tuple) else lam,
                "patches_m": self.config.patches_m,
                "apply_support": self.config.apply_support,
                "apply_query": self.config.apply_query,
                "metric": self.config.metric,
                "normalize": self.config.normalize,
            },
            "seed": self.seed,
            "backend": self.backend,
            "dataset": self.dataset_info,
            "episode_stream_hash": self.episode_stream_hash,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


class _DatasetArrays:
    """Float64 views of a dataset laid out for fast episode gathering."""

    def __init__(self, dataset: EmbeddingDataset):
        self.dataset = dataset
        self.totality = np.stack([r.totality for r in dataset.records]).astype(np.float64)
        counts = np.asarray([r.patch_count for r in dataset.records], dtype=np.int64)
        self.offsets = np.zeros(len(dataset.records) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        if counts.sum() > 0:
            self.patches = np.concatenate(
                [r.patches for r in dataset.records if r.patch_count > 0]
            ).astype(np.float64)
        else:
            self.patches = np.zeros((0, dataset.dim))
        self.patch_counts = counts

    def gather_patches(self, positions: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
        """Subsample m patches for each record position, in position order.

        Consumes the stream exactly as `store.subsample_patches` would when
        called record by record.
        """
        flat = positions.reshape(-1)
        out = np.empty((flat.size, m, self.dataset.dim))
        for i, pos in enumerate(flat):
            idx = draw_patch_indices(int(self.patch_counts[pos]), m, rng)
            out[i] = self.patches[self.offsets[pos] + idx]
        return out.reshape(*positions.shape, m, self.dataset.dim)


def _check_patch_capacity(dataset: EmbeddingDataset, m: int) -> None:
    for rec in dataset.records:
        if rec.patch_count < m:
            raise CapacityError(
                f"record {rec.record_id} has {rec.patch_count} patches, need {m}"
            )


def _hash_episode(hasher, episode: Episode) -> None:
    hasher.update(episode.class_indices.astype("<i8").tobytes())
    hasher.update(episode.support.astype("<i8").tobytes())
    hasher.update(episode.query.astype("<i8").tobytes())


def run_eval(
    dataset: EmbeddingDataset,
    spec: EpisodeSpec,
    config: FusionConfig,
    master_seed: int,
    backend: str | None = None,
) -> EvalReport:
    """Evaluate the dataset episodically under one fusion configuration.

    Prototypes honor ``apply_support`` (weight forced to 1 when off),
    query features honor ``apply_query``; accuracy is averaged per group
    and the 95% interval half-width is taken over group means.
    """
    kernel = core.get_backend(backend)
    arrays = _DatasetArrays(dataset)
    lam_sup = config.effective_lambda(config.apply_support)
    lam_q = config.effective_lambda(config.apply_query)
    sup_vec = None if lam_sup is None else lam_sup.vector(dataset.dim)
    q_vec = None if lam_q is None else lam_q.vector(dataset.dim)
    if sup_vec is not None or q_vec is not None:
        _check_patch_capacity(dataset, config.patches_m)
    metric_kind = _METRIC_KIND[config.metric]

    hasher = hashlib.sha256()
    group_acc = []
    nll_total = 0.0
    queries_per_episode = spec.n_way * spec.q_query
    truth = np.repeat(np.arange(spec.n_way), spec.q_query)
    for g in range(spec.groups):
        correct = 0
        for i in range(spec.episodes_per_group):
            episode = episode_at(dataset, spec, master_seed, g, i)
            _hash_episode(hasher, episode)
            erng = eval_rng_at(master_seed, g, i)

            sup_tot = arrays.totality[episode.support]
            sup_pat = (
                arrays.gather_patches(episode.support, config.patches_m, erng)
                if sup_vec is not None
                else None
            )
            q_tot = arrays.totality[episode.query]
            q_pat = (
                arrays.gather_patches(episode.query, config.patches_m, erng)
                if q_vec is not None
                else None
            )

            preds, _, nlls = kernel.evaluate_episode(
                sup_tot, sup_pat, q_tot, q_pat, sup_vec, q_vec,
                episode.class_indices, metric_kind, config.normalize,
            )
            correct += int((preds == truth).sum())
            nll_total += float(nlls.sum())
        group_acc.append(100.0 * correct / (spec.episodes_per_group * queries_per_episode))

    mean_acc = sum(group_acc) / len(group_acc)
    if len(group_acc) > 1:
        sd = float(np.std(group_acc, ddof=1))
        ci95 = 1.96 * sd / np.sqrt(len(group_acc))
    else:
        ci95 = 0.0
    total_queries = spec.groups * spec.episodes_per_group * queries_per_episode
    return EvalReport(
        per_group_accuracy=group_acc,
        mean_accuracy=mean_acc,
        ci95=float(ci95),
        mean_nll=nll_total / total_queries,
        total_queries=total_queries,
        spec=spec,
        config=config,
        seed=master_seed,
        backend=kernel.BACKEND_NAME,
        dataset_info={
            "provenance": dataset.provenance,
            "dim": dataset.dim,
            "records": len(dataset.records),
            "classes": len(dataset.class_names),
        },
        episode_stream_hash=hasher.hexdigest(),
    )


ABLATION_ROWS = ((False, False), (True, False), (False, True), (True, True))


def ablate(
    dataset: EmbeddingDataset,
    spec: EpisodeSpec,
    config: FusionConfig,
    master_seed: int,
    backend: str | None = None,
) -> list[dict]:
    """The 2x2 support/query rectification table on shared episodes."""
    rows = []
    for apply_support, apply_query in ABLATION_ROWS:
        row_config = replace(config, apply_support=apply_support, apply_query=apply_query)
        report = run_eval(dataset, spec, row_config, master_seed, backend=backend)
        rows.append(
            {
                "apply_support": apply_support,
                "apply_query": apply_query,
                "accuracy": report.mean_accuracy,
                "ci95": report.ci95,
                "report": report,
            }
        )
    return rows


def sweep_lambda(
    dataset: EmbeddingDataset,
    spec: EpisodeSpec,
    lambdas,
    m_values,
    master_seed: int,
    config: FusionConfig | None = None,
    backend: str | None = None,
) -> list[dict]:
    """Accuracy per (blend weight, patch count) over shared episodes."""
    base = config if config is not None else FusionConfig()
    rows = []
    for m in m_values:
        for lam in lambdas:
            run_config = replace(base, lam=LambdaDiag(float(lam)), patches_m=int(m))
            report = run_eval(dataset, spec, run_config, master_seed, backend=backend)
            rows.append(
                {
                    "lambda": float(lam),
                    "m": int(m),
                    "accuracy": report.mean_accuracy,
                    "ci95": report.ci95,
                }
            )
    return rows


def sweep_patches(
    dataset: EmbeddingDataset,
    spec: EpisodeSpec,
    m_values,
    lam: LambdaDiag,
    master_seed: int,
    config: FusionConfig | None = None,
    backend: str | None = None,
) -> list[dict]:
    """Accuracy per patch count at a fixed blend weight; 0 = totality only."""
    base = config if config is not None else FusionConfig()
    rows = []
    for m in m_values:
        if m == 0:
            run_config = replace(base, lam=LambdaDiag(1.0), patches_m=1)
        else:
            run_config = replace(base, lam=lam, patches_m=int(m))
        report = run_eval(dataset, spec, run_config, master_seed, backend=backend)
        rows.append(
            {"m": int(m), "lambda": 1.0 if m == 0 else float(np.mean(lam.vector(dataset.dim))),
             "accuracy": report.mean_accuracy, "ci95": report.ci95}
        )
    return rows


def fused_features_by_class(
    dataset: EmbeddingDataset, config: FusionConfig, master_seed: int
) -> dict[int, np.ndarray]:
    """Estimate every record's feature under ``config``, grouped by class.

    Records are processed in dataset order with one stream derived from
    the master seed, so the grouping is reproducible.
    """
    if not config.lam.is_one:
        _check_patch_capacity(dataset, config.patches_m)
    rng = subseed_rng(master_seed, _VARIANCE_STREAM)
    groups: dict[int, list[np.ndarray]] = {}
    for rec in dataset.records:
        groups.setdefault(rec.class_index, []).append(estimate_feature(rec, config, rng))
    return {c: np.stack(feats) for c, feats in groups.items()}


def variance_report(
    dataset: EmbeddingDataset,
    config: FusionConfig,
    master_seed: int,
    spec: EpisodeSpec | None = None,
    grid=None,
    backend: str | None = None,
) -> dict:
    """Intra-class variance before/after fusion, plus the grid-best weight.

    The best weight is the accuracy argmax of a lambda sweep over episodes
    drawn with the same master seed.
    """
    totality_groups = {
        c: np.stack([dataset.records[p].totality.astype(np.float64) for p in positions])
        for c, positions in enumerate(dataset.records_by_class())
        if len(positions) > 0
    }
    var_before = intra_class_variance(totality_groups)
    var_after = intra_class_variance(fused_features_by_class(dataset, config, master_seed))

    if spec is None:
        spec = EpisodeSpec(groups=2, episodes_per_group=200)
    if grid is None:
        grid = [round(0.1 * i, 1) for i in range(11)]
    rows = sweep_lambda(
        dataset, spec, grid, [config.patches_m], master_seed, config=config, backend=backend
    )
    best = max(rows, key=lambda r: (r["accuracy"], -r["lambda"]))
    return {
        "variance_totality": var_before,
        "variance_fused": var_after,
        "best_lambda": best["lambda"],
        "lambda_grid": [r["lambda"] for r in rows],
        "grid_accuracies": [r["accuracy"] for r in rows],
    }

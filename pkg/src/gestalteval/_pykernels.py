"""Pure numpy episode-evaluation kernel.

Reference implementation of the hot loop; `gestalteval.core` prefers the
compiled twin in `_ckernels` when it imported successfully. Both backends
take the same pre-gathered float64 arrays and must agree on predictions
(floating-point rounding may differ in the last ulps of probabilities).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

METRIC_SQEUCLID = 0
METRIC_COSINE = 1

_NLL_FLOOR = 1e-300


def _fuse_rows(tot: np.ndarray, clo: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # Endpoint weights return the trusted observer's entries bitwise.
    return np.where(lam == 1.0, tot, np.where(lam == 0.0, clo, clo + lam * (tot - clo)))


def _normalize_rows(rows: np.ndarray, what: str) -> np.ndarray:
    norms = np.sqrt(np.sum(rows * rows, axis=1, keepdims=True))
    if (norms == 0.0).any():
        raise ValueError(f"cannot normalize zero-length {what} vector")
    return rows / norms


def evaluate_episode(
    sup_tot: np.ndarray,
    sup_pat,
    q_tot: np.ndarray,
    q_pat,
    lam_sup,
    lam_q,
    class_ids: np.ndarray,
    metric_kind: int,
    normalize: bool,
):
    """Classify one episode's queries against its support prototypes.

    Arrays: ``sup_tot`` (N, K, D); ``sup_pat`` (N, K, m, D) or None when
    prototypes are totality-only; ``q_tot`` (N, Q, D) grouped by true
    class; ``q_pat`` (N, Q, m, D) or None. ``lam_sup``/``lam_q`` are (D,)
    blend weights or None for the totality-only shortcut. ``class_ids``
    are the episode's dataset class indices, used only for tie-breaking.

    Returns (predicted class positions (N*Q,), probabilities (N*Q, N),
    negative log-likelihoods (N*Q,)); query row i has true position i // Q.
    """
    n_way, _, dim = sup_tot.shape
    n_query = q_tot.shape[1]

    protos = sup_tot.mean(axis=1)
    if lam_sup is not None:
        proto_c = sup_pat.reshape(n_way, -1, dim).mean(axis=1)
        protos = _fuse_rows(protos, proto_c, lam_sup)

    feats = q_tot.reshape(n_way * n_query, dim)
    if lam_q is not None:
        q_clo = q_pat.reshape(n_way * n_query, -1, dim).mean(axis=1)
        feats = _fuse_rows(feats, q_clo, lam_q)

    if normalize:
        protos = _normalize_rows(protos, "prototype")
        feats = _normalize_rows(feats, "query")

    if metric_kind == METRIC_SQEUCLID:
        diff = feats[:, None, :] - protos[None, :, :]
        dists = np.sum(diff * diff, axis=2)
    elif metric_kind == METRIC_COSINE:
        qn = np.sqrt(np.sum(feats * feats, axis=1))
        pn = np.sqrt(np.sum(protos * protos, axis=1))
        if (qn == 0.0).any() or (pn == 0.0).any():
            raise ValueError("cosine distance undefined for a zero vector")
        dists = 1.0 - (feats @ protos.T) / (qn[:, None] * pn[None, :])
    else:
        raise ValueError(f"unknown metric kind {metric_kind}")

    logits = -dists
    shifted = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    probs = weights / weights.sum(axis=1, keepdims=True)

    preds = np.empty(n_way * n_query, dtype=np.int64)
    nlls = np.empty(n_way * n_query)
    for i in range(n_way * n_query):
        best = 0
        for j in range(1, n_way):
            if probs[i, j] > probs[i, best] or (
                probs[i, j] == probs[i, best] and class_ids[j] < class_ids[best]
            ):
                best = j
        preds[i] = best
        p_true = probs[i, i // n_query]
        nlls[i] = -np.log(p_true if p_true > _NLL_FLOOR else _NLL_FLOOR)
    return preds, probs, nlls

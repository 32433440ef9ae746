# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled episode-evaluation kernel.

Same contract as `_pykernels.evaluate_episode`; plain C loops instead of
vectorized numpy, which removes the per-episode allocation overhead that
dominates runs of tens of thousands of small episodes.
"""

from libc.math cimport exp, log, sqrt

import numpy as np

BACKEND_NAME = "compiled"

METRIC_SQEUCLID = 0
METRIC_COSINE = 1

cdef double NLL_FLOOR = 1e-300


cdef inline double _fuse_entry(double tot, double clo, double lam) noexcept nogil:
    if lam == 1.0:
        return tot
    if lam == 0.0:
        return clo
    return clo + lam * (tot - clo)


cdef int _normalize_rows(double[:, ::1] rows) except -1:
    cdef Py_ssize_t i, d
    cdef double acc, norm
    for i in range(rows.shape[0]):
        acc = 0.0
        for d in range(rows.shape[1]):
            acc += rows[i, d] * rows[i, d]
        if acc == 0.0:
            raise ValueError("cannot normalize zero-length vector")
        norm = sqrt(acc)
        for d in range(rows.shape[1]):
            rows[i, d] /= norm
    return 0


def evaluate_episode(sup_tot, sup_pat, q_tot, q_pat, lam_sup, lam_q, class_ids,
                     int metric_kind, bint normalize):
    """See `gestalteval._pykernels.evaluate_episode` for the contract."""
    cdef double[:, :, ::1] st = np.ascontiguousarray(sup_tot, dtype=np.float64)
    cdef double[:, :, ::1] qt = np.ascontiguousarray(q_tot, dtype=np.float64)
    cdef Py_ssize_t n_way = st.shape[0]
    cdef Py_ssize_t k_shot = st.shape[1]
    cdef Py_ssize_t dim = st.shape[2]
    cdef Py_ssize_t n_query = qt.shape[1]
    cdef Py_ssize_t rows = n_way * n_query

    cdef bint use_sup = lam_sup is not None
    cdef bint use_q = lam_q is not None
    cdef double[:, :, :, ::1] sp
    cdef double[:, :, :, ::1] qp
    cdef double[::1] ls
    cdef double[::1] lq
    if use_sup:
        sp = np.ascontiguousarray(sup_pat, dtype=np.float64)
        ls = np.ascontiguousarray(lam_sup, dtype=np.float64)
    if use_q:
        qp = np.ascontiguousarray(q_pat, dtype=np.float64)
        lq = np.ascontiguousarray(lam_q, dtype=np.float64)
    cdef long long[::1] cls = np.ascontiguousarray(class_ids, dtype=np.int64)

    protos_arr = np.empty((n_way, dim))
    feats_arr = np.empty((rows, dim))
    cdef double[:, ::1] protos = protos_arr
    cdef double[:, ::1] feats = feats_arr

    cdef Py_ssize_t n, k, j, d, i, q, best
    cdef double acc, tot, clo, pool

    # Prototypes: mean of totality vectors, blended with the pooled patch
    # mean when the support side is active.
    for n in range(n_way):
        for d in range(dim):
            acc = 0.0
            for k in range(k_shot):
                acc += st[n, k, d]
            protos[n, d] = acc / k_shot
    if use_sup:
        pool = <double> (k_shot * sp.shape[2])
        for n in range(n_way):
            for d in range(dim):
                acc = 0.0
                for k in range(k_shot):
                    for j in range(sp.shape[2]):
                        acc += sp[n, k, j, d]
                clo = acc / pool
                protos[n, d] = _fuse_entry(protos[n, d], clo, ls[d])

    # Query features, one row per query, grouped by true class.
    for n in range(n_way):
        for q in range(n_query):
            i = n * n_query + q
            for d in range(dim):
                feats[i, d] = qt[n, q, d]
            if use_q:
                for d in range(dim):
                    acc = 0.0
                    for j in range(qp.shape[2]):
                        acc += qp[n, q, j, d]
                    clo = acc / qp.shape[2]
                    feats[i, d] = _fuse_entry(feats[i, d], clo, lq[d])

    if normalize:
        _normalize_rows(protos)
        _normalize_rows(feats)

    dists_arr = np.empty((rows, n_way))
    cdef double[:, ::1] dists = dists_arr
    cdef double diff, dot, qnorm, pnorm
    cdef double[::1] pnorms
    if metric_kind == METRIC_SQEUCLID:
        for i in range(rows):
            for n in range(n_way):
                acc = 0.0
                for d in range(dim):
                    diff = feats[i, d] - protos[n, d]
                    acc += diff * diff
                dists[i, n] = acc
    elif metric_kind == METRIC_COSINE:
        pnorms = np.empty(n_way)
        for n in range(n_way):
            acc = 0.0
            for d in range(dim):
                acc += protos[n, d] * protos[n, d]
            if acc == 0.0:
                raise ValueError("cosine distance undefined for a zero vector")
            pnorms[n] = sqrt(acc)
        for i in range(rows):
            acc = 0.0
            for d in range(dim):
                acc += feats[i, d] * feats[i, d]
            if acc == 0.0:
                raise ValueError("cosine distance undefined for a zero vector")
            qnorm = sqrt(acc)
            for n in range(n_way):
                dot = 0.0
                for d in range(dim):
                    dot += feats[i, d] * protos[n, d]
                dists[i, n] = 1.0 - dot / (qnorm * pnorms[n])
    else:
        raise ValueError(f"unknown metric kind {metric_kind}")

    preds_arr = np.empty(rows, dtype=np.int64)
    probs_arr = np.empty((rows, n_way))
    nlls_arr = np.empty(rows)
    cdef long long[::1] preds = preds_arr
    cdef double[:, ::1] probs = probs_arr
    cdef double[::1] nlls = nlls_arr
    cdef double mx, total, p_true
    for i in range(rows):
        mx = -dists[i, 0]
        for n in range(1, n_way):
            if -dists[i, n] > mx:
                mx = -dists[i, n]
        total = 0.0
        for n in range(n_way):
            probs[i, n] = exp(-dists[i, n] - mx)
            total += probs[i, n]
        for n in range(n_way):
            probs[i, n] /= total
        best = 0
        for n in range(1, n_way):
            if probs[i, n] > probs[i, best] or (
                probs[i, n] == probs[i, best] and cls[n] < cls[best]
            ):
                best = n
        preds[i] = best
        p_true = probs[i, i // n_query]
        if p_true < NLL_FLOOR:
            p_true = NLL_FLOOR
        nlls[i] = -log(p_true)
    return preds_arr, probs_arr, nlls_arr

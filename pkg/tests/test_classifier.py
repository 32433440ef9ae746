"""Prototype construction and softmax classification against precise oracles."""

import math

import numpy as np
import pytest
from mpmath import mp, mpf
from scipy.special import logsumexp

from gestalteval.classifier import (
    Prototype,
    classify,
    closure_prototype,
    distance,
    fused_prototype,
    nll,
    totality_prototype,
)
from gestalteval.errors import ConfigError
from gestalteval.estimator import LambdaDiag
from gestalteval.store import ImageRecord, subsample_patches


def record_of(class_index, totality, patches=(), rid=0):
    dim = len(totality)
    pat = np.asarray(patches, np.float32).reshape(-1, dim)
    return ImageRecord(rid, class_index, np.asarray(totality, np.float32), pat)


def softmax_highprec(dists):
    """Direct softmax over negative distances at 60 decimal digits."""
    mp.dps = 60
    weights = [mp.exp(-mpf(d)) for d in dists]
    total = sum(weights)
    return np.array([float(w / total) for w in weights])


class TestTotalityPrototype:
    def test_one_shot(self):
        rec = record_of(3, [1.0, 2.0])
        proto = totality_prototype([rec])
        assert proto.class_index == 3
        assert np.array_equal(proto.vector, [1.0, 2.0])

    def test_two_records(self):
        proto = totality_prototype([record_of(0, [1, 0]), record_of(0, [0, 1], rid=1)])
        assert np.array_equal(proto.vector, [0.5, 0.5])

    def test_matches_bruteforce_sum(self):
        rng = np.random.default_rng(4)
        recs = [record_of(1, rng.normal(size=6), rid=i) for i in range(5)]
        proto = totality_prototype(recs)
        brute = sum(r.totality.astype(np.float64) for r in recs) / 5
        assert np.max(np.abs(proto.vector - brute)) <= 1e-12

    def test_empty_and_mixed_class(self):
        with pytest.raises(ConfigError):
            totality_prototype([])
        with pytest.raises(ConfigError):
            totality_prototype([record_of(0, [1.0]), record_of(1, [2.0], rid=1)])


class TestClosurePrototype:
    def test_single_image_single_patch(self):
        rec = record_of(2, [9.0, 9.0], [[1.0, 2.0]])
        proto = closure_prototype([rec], 1, np.random.default_rng(0))
        assert np.array_equal(proto.vector, [1.0, 2.0])

    def test_pooled_mean(self):
        recs = [
            record_of(0, [0, 0], [[0, 0], [2, 2]]),
            record_of(0, [0, 0], [[4, 4], [6, 6]], rid=1),
        ]
        proto = closure_prototype(recs, 2, np.random.default_rng(0))
        assert np.array_equal(proto.vector, [3.0, 3.0])

    def test_matches_subsample_composition(self):
        rng = np.random.default_rng(8)
        recs = [record_of(0, rng.normal(size=3), rng.normal(size=(6, 3)), rid=i) for i in range(3)]
        proto = closure_prototype(recs, 4, np.random.default_rng(77))
        comp_rng = np.random.default_rng(77)
        pool = np.concatenate([subsample_patches(r, 4, comp_rng) for r in recs]).astype(np.float64)
        assert np.array_equal(proto.vector, pool.mean(axis=0))

    def test_insufficient_patches(self):
        rec = record_of(0, [0.0], [[1.0]])
        with pytest.raises(Exception, match="out of bounds"):
            closure_prototype([rec], 3, np.random.default_rng(0))


class TestFusedPrototype:
    def test_endpoints(self):
        pt = Prototype(0, np.array([2.0, 0.0]))
        pc = Prototype(0, np.array([0.0, 2.0]))
        assert np.array_equal(fused_prototype(pt, pc, LambdaDiag(1.0)).vector, pt.vector)
        assert np.array_equal(fused_prototype(pt, pc, LambdaDiag(0.0)).vector, pc.vector)

    def test_quarter_blend(self):
        pt = Prototype(0, np.array([2.0, 0.0]))
        pc = Prototype(0, np.array([0.0, 2.0]))
        assert np.array_equal(fused_prototype(pt, pc, LambdaDiag(0.25)).vector, [0.5, 1.5])

    def test_class_mismatch(self):
        with pytest.raises(ConfigError):
            fused_prototype(Prototype(0, np.zeros(2)), Prototype(1, np.ones(2)), LambdaDiag(0.5))


class TestClassify:
    def test_exact_match_wins(self):
        protos = [Prototype(c, v) for c, v in
                  ((0, np.array([10.0, 0.0])), (2, np.array([0.0, 0.0])), (5, np.array([0.0, 10.0])))]
        pred, probs = classify(np.array([0.0, 0.0]), protos)
        assert pred == 2
        assert probs[1] == probs.max()

    def test_equidistant_uniform_and_tie_to_lowest_class(self):
        protos = [
            Prototype(4, np.array([1.0, 0.0, 0.0])),
            Prototype(1, np.array([0.0, 1.0, 0.0])),
            Prototype(9, np.array([0.0, 0.0, 1.0])),
        ]
        pred, probs = classify(np.zeros(3), protos)
        assert np.allclose(probs, 1.0 / 3.0)
        assert pred == 1

    def test_matches_high_precision_softmax(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            protos = [Prototype(c, rng.normal(size=8)) for c in range(5)]
            query = rng.normal(size=8)
            _, probs = classify(query, protos)
            assert abs(probs.sum() - 1.0) <= 1e-9
            dists = [distance(query, p.vector, "sqeuclid") for p in protos]
            oracle = softmax_highprec(dists)
            assert np.allclose(probs, oracle, rtol=1e-9, atol=1e-12)

    def test_prediction_invariant_to_distance_shift(self):
        # Softmax probabilities are unchanged by adding a constant to all
        # distances; verify via translated prototypes around a shifted query.
        rng = np.random.default_rng(30)
        protos = [Prototype(c, rng.normal(size=4)) for c in range(4)]
        query = rng.normal(size=4)
        pred, probs = classify(query, protos)
        shift = 7.5
        dists = np.array([distance(query, p.vector, "sqeuclid") for p in protos])
        shifted = np.exp(-(dists + shift) - (-(dists + shift)).max())
        assert np.allclose(shifted / shifted.sum(), probs, rtol=1e-12)

    def test_extreme_distances_stable(self):
        protos = [Prototype(0, np.array([0.0])), Prototype(1, np.array([2000.0]))]
        pred, probs = classify(np.array([0.0]), protos)
        assert pred == 0
        assert np.isfinite(probs).all() and abs(probs.sum() - 1.0) <= 1e-9

    def test_cosine_metric(self):
        protos = [Prototype(0, np.array([1.0, 0.0])), Prototype(1, np.array([0.0, 1.0]))]
        pred, _ = classify(np.array([0.9, 0.1]), protos, metric="cosine")
        assert pred == 0
        with pytest.raises(ConfigError, match="zero vector"):
            classify(np.zeros(2), protos, metric="cosine")

    def test_needs_two_distinct_prototypes(self):
        with pytest.raises(ConfigError):
            classify(np.zeros(2), [Prototype(0, np.zeros(2))])
        with pytest.raises(ConfigError):
            classify(np.zeros(2), [Prototype(0, np.zeros(2)), Prototype(0, np.ones(2))])


class TestNll:
    def test_uniform_five_way(self):
        assert abs(nll(np.full(5, 0.2), 0) - math.log(5)) <= 1e-12

    def test_certain_prediction(self):
        assert nll(np.array([0.0, 1.0, 0.0]), 1) == 0.0

    def test_matches_distance_form(self):
        # NLL == d_true + logsumexp(-d) on random instances, within 1e-9.
        rng = np.random.default_rng(9)
        for _ in range(25):
            protos = [Prototype(c, rng.normal(size=6)) for c in range(5)]
            query = rng.normal(size=6)
            _, probs = classify(query, protos)
            dists = np.array([distance(query, p.vector, "sqeuclid") for p in protos])
            true = int(rng.integers(0, 5))
            assert abs(nll(probs, true) - (dists[true] + logsumexp(-dists))) <= 1e-9

    def test_zero_probability_clamped_with_warning(self):
        with pytest.warns(RuntimeWarning, match="clamped"):
            value = nll(np.array([1.0, 0.0]), 1)
        assert value == -math.log(1e-300)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeif import iforest
from aeif.iforest import (
    IsolationForestModel,
    IsolationTree,
    build_tree,
    c,
    calibrate_threshold,
    decide,
    decision_function,
    fit,
    harmonic,
    path_length,
    score,
    score_from_path,
)

from oracles import c_ref, expected_path_1d


class TestNormalizer:
    def test_small_values(self):
        assert c(0) == 0.0
        assert c(1) == 0.0
        assert c(2) == pytest.approx(0.1544313298, abs=1e-10)
        # 2(ln 3 + gamma) - 3/2
        assert c(4) == pytest.approx(1.8516559072, abs=1e-9)

    def test_psi_256(self):
        assert abs(c(256) - 10.2445) <= 1e-3

    def test_harmonic(self):
        assert harmonic(1) == pytest.approx(0.5772156649)
        assert harmonic(10) == pytest.approx(math.log(10) + 0.5772156649)

    @given(st.integers(2, 10_000))
    def test_matches_reference(self, n):
        assert c(n) == pytest.approx(c_ref(n), rel=1e-12)

    def test_increasing(self):
        vals = [c(n) for n in range(1, 500)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestScore:
    def test_half_when_path_equals_c(self):
        for psi in (2, 16, 256):
            assert abs(score_from_path(c(psi), psi) - 0.5) <= 1e-12

    def test_limits(self):
        assert score_from_path(0.0, 256) == 1.0
        assert score_from_path(1e6, 256) < 1e-10

    def test_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(0)
        model = fit(rng.normal(size=(2000, 3)), n_trees=50, seed=1)
        queries = np.vstack([rng.normal(size=(9000, 3)), rng.normal(scale=50, size=(1000, 3))])
        s = score(model, queries)
        assert s.shape == (10_000,)
        assert np.all((s > 0) & (s < 1))

    def test_single_point_returns_float(self):
        model = fit(np.arange(20.0)[:, None], n_trees=5)
        assert isinstance(score(model, np.array([3.0])), float)

    def test_unfitted(self):
        with pytest.raises(ValueError, match="not fitted"):
            score(None, np.zeros((1, 2)))


def hand_tree():
    # Root splits x0 at 0.5; the left child splits x0 at 0.2 and holds 3 points.
    return IsolationTree.from_preorder(
        feature=[0, 0, -1, -1, -1],
        threshold=[0.5, 0.2, 0.0, 0.0, 0.0],
        size=[8, 3, 1, 2, 5],
        height_limit=3,
        n_features=1,
    )


class TestPathLength:
    def test_hand_built_tree(self):
        t = hand_tree()
        np.testing.assert_allclose(
            path_length(t, np.array([[0.1], [0.3], [0.9]])),
            [2.0, 2.0 + c(2), 1.0 + c(5)],
        )

    def test_boundary_goes_right(self):
        t = hand_tree()
        assert path_length(t, np.array([0.5])) == pytest.approx(1.0 + c(5))

    def test_serialization_round_trip(self):
        t = hand_tree()
        back = IsolationTree.from_dict(t.to_dict())
        np.testing.assert_array_equal(back.left, t.left)
        np.testing.assert_array_equal(back.depth, t.depth)

    def test_height_limit_leaves_have_correction(self):
        rng = np.random.default_rng(2)
        t = build_tree(rng.normal(size=(64, 2)), height_limit=2, rng=rng)
        assert t.depth.max() <= 2
        assert t.size[0] == 64

    def test_duplicate_points_stop_splitting(self):
        t = build_tree(np.ones((10, 2)), height_limit=8, rng=np.random.default_rng(0))
        assert t.n_nodes == 1
        assert path_length(t, np.ones(2)) == pytest.approx(c(10))

    def test_splits_are_strictly_inside_range(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(128, 3))
        t = build_tree(pts, 7, rng)
        internal = t.feature >= 0
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        assert np.all(t.threshold[internal] > lo[t.feature[internal]])
        assert np.all(t.threshold[internal] < hi[t.feature[internal]])


class TestOracle:
    @pytest.mark.parametrize("seed", range(10))
    def test_planted_outlier_ranks_first(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 9))
        pts = rng.normal(size=n)
        planted = int(rng.integers(n))
        pts[planted] = pts.max() + 10.0 + rng.uniform(0, 5)
        limit = math.ceil(math.log2(n))
        expected = np.array([expected_path_1d(pts, i, limit) for i in range(n)])
        model = fit(pts[:, None], n_trees=2000, psi=256, seed=seed)
        s = score(model, pts[:, None])
        assert int(np.argmax(s)) == planted == int(np.argmin(expected))

    @pytest.mark.parametrize("seed", range(5))
    def test_mean_path_matches_exact_expectation(self, seed):
        rng = np.random.default_rng(100 + seed)
        pts = rng.normal(size=7)
        model = fit(pts[:, None], n_trees=4000, seed=seed)
        got = iforest.mean_path_length(model, pts[:, None])
        want = [expected_path_1d(pts, i, 3) for i in range(7)]
        np.testing.assert_allclose(got, want, atol=0.05)


class TestCalibration:
    @pytest.mark.parametrize("tau", [0.05, 0.1, 0.2])
    def test_flagged_fraction(self, tau):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(3000, 4))
        model = fit(x, n_trees=60, tau=tau, seed=3)
        _, _, flag = decision_function(model, x)
        assert abs(flag.mean() - tau) <= 1 / x.shape[0]

    def test_threshold_rule(self):
        s = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
        assert calibrate_threshold(s, 0.2) == 0.8
        assert calibrate_threshold(s, 0.05) == 1.0

    @given(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=200), st.sampled_from([0.05, 0.1, 0.2, 0.5]))
    @settings(max_examples=100)
    def test_at_most_floor_tau_n_strictly_above(self, scores, tau):
        s = np.asarray(scores)
        thr = calibrate_threshold(s, tau)
        assert np.sum(s > thr) <= math.floor(tau * s.size + 1e-9)


class TestDecide:
    def test_verdict_sign(self):
        rng = np.random.default_rng(1)
        model = fit(rng.normal(size=(500, 2)), n_trees=30, seed=0)
        for x in (np.zeros(2), np.array([8.0, -8.0])):
            s, f, flag = decide(model, x)
            assert f == pytest.approx(model.score_threshold - s)
            assert flag == (f < 0)
        assert decide(model, np.array([8.0, -8.0]))[2]

    def test_tie_is_normal(self):
        rng = np.random.default_rng(1)
        base = fit(rng.normal(size=(200, 1)), n_trees=10, seed=0)
        x = np.array([0.3])
        s = score(base, x)
        tied = IsolationForestModel(base.trees, base.psi, base.tau, s, base.seed)
        _, f, flag = decide(tied, x)
        assert f == 0.0 and not flag


class TestFit:
    def test_deterministic(self):
        x = np.random.default_rng(0).normal(size=(400, 3))
        a, b = fit(x, seed=9), fit(x, seed=9)
        assert a.dumps() == b.dumps()
        assert fit(x, seed=10).dumps() != a.dumps()

    def test_psi_capped_at_n(self):
        model = fit(np.arange(10.0)[:, None], n_trees=3, psi=256)
        assert model.psi == 10

    def test_round_trip(self):
        x = np.random.default_rng(0).normal(size=(300, 2))
        model = fit(x, n_trees=20)
        back = IsolationForestModel.loads(model.dumps())
        np.testing.assert_array_equal(score(back, x), score(model, x))

    @pytest.mark.parametrize("kw", [dict(tau=0.0), dict(tau=0.6), dict(n_trees=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            fit(np.zeros((10, 1)) + np.arange(10)[:, None], **kw)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit(np.zeros((1, 2)))

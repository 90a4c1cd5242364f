import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adtalk.boosting import (
    EPS,
    Ensemble,
    Stump,
    exp_loss,
    fit_stump,
    logistic_objective,
    train_logistic_baseline,
    train_real_adaboost,
)
from adtalk.errors import DegenerateStumpError, TrainingError, ValidationError

from .oracles import brute_force_stump_z, replay_weights

X1 = np.array([[1.0], [2.0], [3.0], [4.0]])
Y1 = np.array([-1, -1, 1, 1])


def random_data(rng, n, d=2, grid=4):
    X = rng.integers(0, grid, size=(n, d)).astype(float)
    y = np.where(rng.random(n) < 0.5, 1, -1)
    y[0], y[1] = 1, -1
    return X, y


class TestStump:
    def test_separable(self, backend):
        s, z = fit_stump(X1, Y1, np.full(4, 0.25))
        assert s.feature_index == 0 and s.threshold == 2.5
        assert s.score_left == pytest.approx(0.5 * math.log(EPS / (1 - EPS)))
        assert s.score_right > 0

    def test_constant_feature_skipped(self):
        X = np.c_[np.full(4, 7.0), X1[:, 0]]
        s, _ = fit_stump(X, Y1, np.full(4, 0.25))
        assert s.feature_index == 1

    def test_tie_goes_to_lowest_feature(self):
        X = np.c_[X1[:, 0], X1[:, 0]]
        assert fit_stump(X, Y1, np.full(4, 0.25))[0].feature_index == 0

    def test_single_class(self):
        with pytest.raises(DegenerateStumpError):
            fit_stump(X1, np.ones(4, dtype=int), np.full(4, 0.25))

    def test_matches_brute_force(self, backend):
        rng = np.random.default_rng(21)
        for _ in range(100):
            X, y = random_data(rng, int(rng.integers(2, 9)))
            w = rng.random(y.size) + 0.01
            w /= w.sum()
            s, z = fit_stump(X, y, w)
            assert z == pytest.approx(brute_force_stump_z(X, y, w), rel=1e-12)
            # the reported z is the loss of the returned stump
            f = s.scores(X)
            assert z == pytest.approx(float(np.sum(w * np.exp(-y * f))), rel=1e-12)


class TestAdaBoost:
    def test_separable_stays_perfect(self, backend):
        trace = []
        m = train_real_adaboost(X1, Y1, trace=trace)
        assert m.rounds == 10
        for k in range(1, 11):
            partial = Ensemble(m.stumps[:k], 1)
            assert np.all(partial.predict(X1) == Y1)

    def test_label_flip_negates(self, rng):
        X, y = random_data(rng, 20, d=3, grid=6)
        a = train_real_adaboost(X, y)
        b = train_real_adaboost(X, -y)
        np.testing.assert_array_equal(b.scores(X), -a.scores(X))

    def test_trace_matches_replay(self, backend):
        rng = np.random.default_rng(4)
        X, y = random_data(rng, 20, d=3, grid=8)
        trace = []
        m = train_real_adaboost(X, y, trace=trace)
        ref = replay_weights(m.stumps, X, y)
        assert len(trace) == m.rounds
        for a, b in zip(trace, ref):
            np.testing.assert_allclose(a, b, rtol=1e-12)
            assert abs(a.sum() - 1) <= 1e-12 and np.all(a > 0)
        losses = [exp_loss(Ensemble(m.stumps[:k], 3), X, y) for k in range(m.rounds + 1)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(losses, losses[1:]))

    def test_fitted_stumps_beat_chance(self, rng):
        X, y = random_data(rng, 30, d=2, grid=5)
        trace = []
        m = train_real_adaboost(X, y, trace=trace)
        for w, s in zip(trace, m.stumps):
            assert w[np.where(s.scores(X) >= 0, 1, -1) != y].sum() < 0.5

    def test_round_one_single_class(self):
        with pytest.raises(TrainingError):
            train_real_adaboost(X1, np.ones(4, dtype=int))

    def test_empty_ensemble(self):
        e = Ensemble([], 2)
        assert e.predict_score([1.0, 2.0]) == 0.0
        assert e.predict(np.zeros((1, 2))).tolist() == [1]

    def test_single_stump_right(self):
        e = Ensemble([Stump(0, 1.0, -0.3, 0.7)], 1)
        assert e.predict_score([2.0]) == 0.7

    def test_score_is_sum_of_lookups(self, rng):
        X, y = random_data(rng, 25, d=3, grid=7)
        m = train_real_adaboost(X, y)
        for x in X:
            ref = sum(s.score_left if x[s.feature_index] <= s.threshold else s.score_right for s in m.stumps)
            assert m.predict_score(x) == pytest.approx(ref, rel=1e-12, abs=1e-15)

    def test_schema_mismatch(self):
        m = train_real_adaboost(X1, Y1)
        with pytest.raises(ValidationError):
            m.predict_score([1.0, 2.0])

    def test_shift_invariance(self, rng):
        X, y = random_data(rng, 24, d=3, grid=6)
        Xt = rng.integers(0, 6, size=(10, 3)).astype(float)
        base = train_real_adaboost(X, y).predict(Xt)
        shift = np.array([0.0, 37.0, 0.0])
        moved = train_real_adaboost(X + shift, y).predict(Xt + shift)
        np.testing.assert_array_equal(base, moved)

    def test_deterministic_and_json(self, rng):
        X, y = random_data(rng, 20, d=3, grid=6)
        a, b = train_real_adaboost(X, y), train_real_adaboost(X, y)
        assert a.to_json() == b.to_json()
        back = Ensemble.from_json(a.to_json(seed=1))
        assert back.stumps == a.stumps
        assert list(json.loads(a.to_json()))[:2] == ["criterion", "rounds"]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 25))
def test_weights_stay_normalised(seed, n):
    rng = np.random.default_rng(seed)
    X, y = random_data(rng, n, d=2, grid=5)
    trace = []
    train_real_adaboost(X, y, trace=trace)
    for w in trace:
        assert abs(w.sum() - 1.0) <= 1e-12 and np.all(w > 0)


class TestLogistic:
    def test_separable(self):
        m = train_logistic_baseline(X1, Y1)
        assert np.all(np.isfinite(m.weights))
        assert np.all(m.predict(X1) == Y1)

    def test_uninformative(self):
        X = np.ones((10, 2))
        y = np.array([1] * 7 + [-1] * 3)
        m = train_logistic_baseline(X, y)
        np.testing.assert_allclose(m.weights, 0, atol=1e-12)
        assert m.intercept == pytest.approx(math.log(7 / 3), abs=1e-6)

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(5):
            X = rng.standard_normal((12, 3))
            y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
            params = rng.standard_normal(4)
            _, g = logistic_objective(params, X, y, 0.1)
            h = 1e-6
            fd = np.array([(logistic_objective(params + h * e, X, y, 0.1)[0]
                            - logistic_objective(params - h * e, X, y, 0.1)[0]) / (2 * h)
                           for e in np.eye(4)])
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)

    def test_non_convergence_is_flagged(self, rng):
        X = rng.standard_normal((30, 4))
        y = np.where(X[:, 0] + 0.5 * rng.standard_normal(30) > 0, 1, -1)
        m = train_logistic_baseline(X, y, max_iter=2)
        assert not m.converged and m.iterations == 2 and m.grad_norm > 0

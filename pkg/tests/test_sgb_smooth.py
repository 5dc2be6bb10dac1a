import math

import numpy as np
import pytest

from conftest import ConstantLearner, ExactGradient
from streamboost.errors import DivergenceError
from streamboost.losses import LossSpec
from streamboost.sgb_smooth import (SGBSmooth, default_eta, prediction_energy_terms, smooth_bound,
                                    smooth_contraction, stage_contraction)
from streamboost.synthetic import linear_regression
from streamboost.weak_learners import OnlineLinear

SQUARE = LossSpec("square")


class TestStepSize:
    @pytest.mark.parametrize("gamma,beta,want", [(1, 1, 0.25), (0.5, 1, 1 / 12), (0.5, 0.25, 1 / 3)])
    def test_examples(self, gamma, beta, want):
        assert default_eta(gamma, beta) == pytest.approx(want)

    @pytest.mark.parametrize("gamma", [0.0, -0.1, 1.2])
    def test_gamma_out_of_range(self, gamma):
        with pytest.raises(ValueError):
            default_eta(gamma, 1.0)


class TestBound:
    def test_empty_ensemble(self):
        assert smooth_bound(3.0, 0.7, 1.0, 2.0, 0) == 6.0

    def test_one_learner(self):
        assert smooth_bound(1.0, 1.0, 1.0, 1.0, 1) == pytest.approx(1.875)
        assert smooth_bound(1.0, 1.0, 1.0, 1.0, 5) == pytest.approx(2 * (15 / 16) ** 5)

    def test_contraction_at_least_seven_eighths(self):
        for gamma in np.linspace(0.01, 1, 50):
            for ratio in np.linspace(0.01, 1, 50):
                c = smooth_contraction(gamma, ratio, 1.0)
                assert 7 / 8 - 1e-15 <= c < 1
                # the default step size turns the generic stage factor into this one
                eta = default_eta(gamma, 1.0)
                assert stage_contraction(eta, gamma, ratio, 1.0) == pytest.approx(c)


class TestHandTraces:
    def test_single_learner_first_step(self):
        rec = ConstantLearner(1, [0.0])
        model = SGBSmooth([rec], 0.1, SQUARE)
        y = model.step([1.0], SQUARE.at([1.0]))
        np.testing.assert_array_equal(y, [0.0])
        np.testing.assert_array_equal(rec.seen, [[-2.0]])

    def test_single_linear_learner_moves_toward_gradient(self):
        l = OnlineLinear(1, 1, step=0.05, schedule="sqrt")
        model = SGBSmooth([l], 0.1, SQUARE)
        y = model.step([1.0], SQUARE.at([1.0]))
        np.testing.assert_array_equal(y, [0.0])
        # one gradient step on (w.[x;1] + 2)^2 from zero with rate 0.05
        np.testing.assert_allclose(l.W, [[-0.2, -0.2]])

    def test_zero_step_size(self, rng):
        learners = [ConstantLearner(2, [3.0]) for _ in range(3)]
        model = SGBSmooth(learners, 0.0, SQUARE, y0=[0.5])
        Z = rng.normal(size=20)
        for z in Z:
            assert model.step(rng.normal(size=2), SQUARE.at([z]))[0] == 0.5
        for l in learners:
            np.testing.assert_allclose(np.ravel(l.seen), 2 * (0.5 - Z))

    def test_two_stage_targets(self):
        a, b = ConstantLearner(1, [1.0]), ConstantLearner(1, [2.0])
        model = SGBSmooth([a, b], 0.1, SQUARE)
        y = model.step([0.0], SQUARE.at([1.0]))
        np.testing.assert_allclose(y, [-0.3])
        np.testing.assert_allclose(a.seen, [[-2.0]])  # gradient at 0
        np.testing.assert_allclose(b.seen, [[-2.2]])  # gradient at -0.1

    @pytest.mark.parametrize("eta", [0.05, 0.1, 0.2])
    def test_exact_learners_contract_geometrically(self, eta, rng):
        N, y0 = 6, 0.0
        Z = rng.normal(size=(40, 1))
        model = SGBSmooth([ExactGradient(i + 1, eta, y0) for i in range(N)], eta, SQUARE)
        trace = model.fit_stream(Z, Z)
        ratios = trace.stage_loss[:, 1:] / trace.stage_loss[:, :-1]
        np.testing.assert_allclose(ratios, (1 - 2 * eta) ** 2, rtol=1e-10)
        assert (1 - 2 * eta) ** 2 <= stage_contraction(eta, 1.0, 2.0, 2.0)


class TestPrediction:
    def test_zero_learners_give_start(self):
        model = SGBSmooth([OnlineLinear(2, 1) for _ in range(3)], 0.2, SQUARE, y0=[1.5])
        np.testing.assert_array_equal(model.predict_online([3.0, 4.0]), [1.5])

    def test_linear_combination(self):
        model = SGBSmooth([ConstantLearner(1, [1.0]), ConstantLearner(1, [2.0])], 0.1, SQUARE)
        np.testing.assert_allclose(model.predict_online([9.0]), [-0.3])

    def test_online_matches_step_output(self, rng):
        model = SGBSmooth([OnlineLinear(3, 1, step=0.1) for _ in range(4)], 0.2, SQUARE)
        for _ in range(50):
            x, z = rng.normal(size=3), rng.normal(size=1)
            before = model.predict_online(x)
            np.testing.assert_allclose(model.step(x, SQUARE.at(z)), before, rtol=0, atol=0)

    def test_average_needs_a_step(self):
        with pytest.raises(RuntimeError):
            SGBSmooth([OnlineLinear(1, 1)], 0.1, SQUARE).predict_average([1.0])

    def test_average_after_one_step_is_first_prediction(self, rng):
        model = SGBSmooth([OnlineLinear(2, 1, step=0.3) for _ in range(2)], 0.25, SQUARE)
        model.learners[0].W[:] = [[0.5, -1.0, 0.2]]
        x = rng.normal(size=2)
        emitted = model.step(x, SQUARE.at([2.0]))
        np.testing.assert_allclose(model.predict_average(x), emitted, atol=1e-15)

    def test_average_of_constant_hypotheses(self, rng):
        model = SGBSmooth([ConstantLearner(2, [0.4]), ConstantLearner(2, [-1.0])], 0.3, SQUARE)
        for _ in range(7):
            model.step(rng.normal(size=2), SQUARE.at(rng.normal(size=1)))
        x = rng.normal(size=2)
        np.testing.assert_allclose(model.predict_average(x), model.predict_online(x))

    @pytest.mark.parametrize("fused", [True, False])
    def test_average_uses_mean_weights(self, fused, rng):
        learners = [OnlineLinear(3, 2, step=0.1) for _ in range(3)]
        spec = LossSpec("square", m=2)
        X, S = rng.normal(size=(25, 3)), rng.normal(size=(25, 2))
        history = [[] for _ in learners]
        model = SGBSmooth(learners, 0.2, spec)
        if fused:
            # replay the same stream generically to collect the weight history
            shadow = SGBSmooth([OnlineLinear(3, 2, step=0.1) for _ in range(3)], 0.2, spec)
            for x, s in zip(X, S):
                for h, l in zip(history, shadow.learners):
                    h.append(l.W.copy())
                shadow.step(x, spec.at(s))
            model.fit_stream(X, S, fused=True)
        else:
            for x, s in zip(X, S):
                for h, l in zip(history, learners):
                    h.append(l.W.copy())
                model.step(x, spec.at(s))
        x = rng.normal(size=3)
        xt = np.append(x, 1.0)
        want = -0.2 * sum(np.mean(h, axis=0) @ xt for h in history)
        np.testing.assert_allclose(model.predict_average(x), want, atol=1e-12)
        np.testing.assert_allclose(model.predict_average_many(x[None])[0], want, atol=1e-12)

    def test_averaged_risk_not_worse_than_online_risk(self):
        data = linear_regression(n=6000, d=5, noise=0.1, seed=3)
        X, Z = data.features, data.supervision()
        model = SGBSmooth([OnlineLinear(5, 1, step=0.05) for _ in range(4)], 0.1, SQUARE)
        trace = model.fit_stream(X[:5000], Z[:5000])
        heldout = np.mean(SQUARE.values(Z[5000:], model.predict_average_many(X[5000:])))
        assert heldout <= np.mean(trace.pred_loss) + 0.05


class TestStreaming:
    def _pair(self, loss, m, eta=0.15, N=3, **hyper):
        make = lambda: [OnlineLinear(4, m, **hyper) for _ in range(N)]
        return SGBSmooth(make(), eta, loss), SGBSmooth(make(), eta, loss)

    @pytest.mark.parametrize("kind,reg,m", [("square", 0.0, 1), ("square", 0.1, 2),
                                             ("logistic_l2", 0.05, 1), ("multiclass_ce", 0.1, 3)])
    def test_compiled_loop_matches_generic(self, kind, reg, m, rng):
        loss = LossSpec(kind, reg, m, domain_bound=4.0)
        X = rng.normal(size=(300, 4))
        if kind == "logistic_l2":
            S = np.sign(rng.normal(size=(300, 1)))
        elif kind == "multiclass_ce":
            S = np.eye(m)[rng.integers(m, size=300)]
        else:
            S = rng.normal(size=(300, m))
        a, b = self._pair(loss, m, step=0.1, radius=5.0)
        ta = a.fit_stream(X, S, fused=True)
        tb = b.fit_stream(X, S, fused=False)
        for name in ("stage_loss", "pred_loss", "preds", "sq_err", "sq_tgt", "sq_pred"):
            np.testing.assert_allclose(getattr(ta, name), getattr(tb, name), rtol=1e-10, atol=1e-12)
        for la, lb in zip(a.learners, b.learners):
            np.testing.assert_allclose(la.W, lb.W, atol=1e-12)
        Xt = rng.normal(size=(20, 4))
        np.testing.assert_allclose(a.predict_average_many(Xt), b.predict_average_many(Xt), atol=1e-12)
        assert a.cost_units == b.cost_units == 3 * 300 * 3

    def test_trace_records_gradient_fit(self, rng):
        model = SGBSmooth([OnlineLinear(2, 1) for _ in range(2)], 0.2, SQUARE)
        X, S = rng.normal(size=(10, 2)), rng.normal(size=(10, 1))
        trace = model.fit_stream(X, S, fused=False)
        # learner 1 always targets the gradient at y0 = 0
        np.testing.assert_allclose(trace.sq_tgt[:, 0], (2 * S[:, 0]) ** 2)
        np.testing.assert_allclose(trace.pred_loss, SQUARE.values(S, trace.preds))

    def test_energy_inequality_per_learner(self):
        data = linear_regression(n=4000, d=5, noise=0.2, seed=1)
        model = SGBSmooth([OnlineLinear(5, 1, step=0.05) for _ in range(5)], 0.12, SQUARE)
        trace = model.fit_stream(data.features, data.supervision())
        for lhs, rhs in prediction_energy_terms(trace):
            assert lhs <= rhs + 1e-9

    @pytest.mark.parametrize("fused", [True, False])
    def test_divergence_guard(self, fused, rng):
        model = SGBSmooth([OnlineLinear(2, 1, step=5.0, schedule="const") for _ in range(3)],
                          50.0, SQUARE)
        with pytest.raises(DivergenceError):
            model.fit_stream(rng.normal(size=(200, 2)), rng.normal(size=(200, 1)) * 10, fused=fused)

    def test_rejects_nonsmooth_loss(self):
        with pytest.raises(ValueError, match="non-smooth"):
            SGBSmooth([OnlineLinear(1, 1)], 0.1, LossSpec("hinge_l2", 0.1))

    def test_needs_a_learner(self):
        with pytest.raises(ValueError):
            SGBSmooth([], 0.1, SQUARE)

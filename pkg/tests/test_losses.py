import math

import numpy as np
import pytest
from scipy.optimize import minimize

from streamboost.losses import (KINDS, LossAtSample, LossError, LossSpec, bound_constants,
                                convexity_constants, gradient, loss_for_data, value)

SMOOTH = [("square", 0.0, 3), ("square", 0.2, 2), ("logistic_l2", 0.0, 1), ("logistic_l2", 0.1, 1),
          ("multiclass_ce", 0.0, 4), ("multiclass_ce", 0.05, 3)]
ALL = SMOOTH + [("hinge_l2", 0.1, 1), ("l1", 0.05, 3), ("hinge_l2", 0.0, 1)]


def random_supervision(kind, m, rng):
    if kind in ("logistic_l2", "hinge_l2"):
        return np.array([rng.choice([-1.0, 1.0])])
    if kind == "multiclass_ce":
        return np.eye(m)[rng.integers(m)]
    return rng.uniform(-1, 1, m)


def reference_value(kind, reg, s, y):
    """Direct formulas, written independently of the kernels."""
    y = np.asarray(y, float)
    pen = reg * float(y @ y)
    if kind == "square":
        return float(np.sum((y - s) ** 2)) + pen
    if kind == "l1":
        return float(np.sum(np.abs(y - s))) + pen
    if kind == "logistic_l2":
        return math.log(1 + math.exp(-s[0] * y[0])) + pen
    if kind == "hinge_l2":
        return max(0.0, 1 - s[0] * y[0]) + pen
    log_softmax = y - np.log(np.sum(np.exp(y)))
    return -float(s @ log_softmax) + pen


class TestExamples:
    def test_logistic_at_zero(self):
        assert LossSpec("logistic_l2").value([1.0], [0.0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_square_unit(self):
        assert LossSpec("square", m=2).value([0, 0], [1, 0]) == 1.0

    def test_hinge_with_penalty(self):
        assert LossSpec("hinge_l2", 0.1).value([1.0], [2.0]) == pytest.approx(0.4)

    def test_square_gradient(self):
        np.testing.assert_allclose(LossSpec("square").gradient([0.0], [3.0]), [6.0])

    def test_logistic_gradient(self):
        np.testing.assert_allclose(LossSpec("logistic_l2").gradient([1.0], [0.0]), [-0.5])

    def test_hinge_kink_gradient_zero(self):
        np.testing.assert_array_equal(LossSpec("hinge_l2").gradient([1.0], [1.0]), [0.0])

    def test_l1_kink_gradient_zero(self):
        np.testing.assert_array_equal(LossSpec("l1", m=2).gradient([1.0, 2.0], [1.0, 3.0]), [0.0, 1.0])

    def test_sample_view_functions(self):
        at = LossAtSample(LossSpec("square"), [1.0])
        assert value(at, [3.0]) == 4.0
        np.testing.assert_array_equal(gradient(at, [3.0]), [4.0])

    @pytest.mark.parametrize("kind,reg,m", ALL)
    def test_matches_direct_formula(self, kind, reg, m, rng):
        spec = LossSpec(kind, reg, m, domain_bound=3.0)
        for _ in range(30):
            s = random_supervision(kind, m, rng)
            y = rng.uniform(-3, 3, m)
            assert spec.value(s, y) == pytest.approx(reference_value(kind, reg, s, y), rel=1e-12, abs=1e-12)

    def test_vectorised_values_match(self, rng):
        spec = LossSpec("multiclass_ce", 0.1, 3)
        S = np.eye(3)[rng.integers(3, size=20)]
        Y = rng.normal(size=(20, 3))
        np.testing.assert_allclose(spec.values(S, Y), [spec.value(s, y) for s, y in zip(S, Y)])


class TestErrors:
    def test_dimension_mismatch(self):
        with pytest.raises(LossError):
            LossSpec("square", m=2).value([0, 0], [1.0])

    def test_supervision_mismatch(self):
        with pytest.raises(LossError):
            LossAtSample(LossSpec("square", m=2), [1.0])

    def test_unknown_kind(self):
        with pytest.raises(LossError):
            LossSpec("huber")

    def test_beta_of_nonsmooth(self):
        with pytest.raises(LossError):
            LossSpec("hinge_l2", 0.1).beta_sm

    def test_bounds_need_domain(self):
        with pytest.raises(LossError):
            LossSpec("hinge_l2").bound_constants()


class TestConstants:
    def test_logistic(self):
        lam, beta = convexity_constants(LossSpec("logistic_l2", domain_bound=1.0))
        assert lam == pytest.approx(1 / (2 + 2 * math.e))
        assert beta == 0.25
        # a valid lower bound on the curvature sigma(y)(1 - sigma(y)) over |y| <= 1
        ys = np.linspace(-1, 1, 2001)
        sig = 1 / (1 + np.exp(-ys))
        assert lam <= np.min(sig * (1 - sig))

    def test_square(self):
        assert convexity_constants(LossSpec("square")) == (2.0, 2.0)

    def test_hinge(self):
        lam, beta = convexity_constants(LossSpec("hinge_l2", 0.05))
        assert lam == pytest.approx(0.1) and beta is None

    def test_l1_without_penalty(self):
        assert convexity_constants(LossSpec("l1", m=2)) == (0.0, None)

    def test_multiclass(self):
        assert convexity_constants(LossSpec("multiclass_ce", 0.1, 3)) == pytest.approx((0.2, 0.7))

    @pytest.mark.parametrize("kind,reg,m", SMOOTH)
    def test_beta_at_least_lambda(self, kind, reg, m):
        lam, beta = LossSpec(kind, reg, m, domain_bound=2.0).convexity_constants()
        assert beta >= lam

    def test_loss_for_data_defaults(self):
        spec = loss_for_data("square", np.array([[3.0, 4.0], [0.0, 1.0]]))
        assert spec.domain_bound == 10.0 and spec.target_bound == 5.0 and spec.m == 2


def grid_max(fn, Y, Z=None, n=801):
    ys = np.linspace(-Y, Y, n)
    zs = [None] if Z is None else np.linspace(-Z, Z, 201)
    return max(fn(y, z) for y in ys for z in zs)


class TestBounds:
    def test_square_example(self):
        spec = LossSpec("square", domain_bound=1.0, target_bound=1.0)
        B, G = bound_constants(spec)
        assert (B, G) == (4.0, 4.0)
        assert grid_max(lambda y, z: (y - z) ** 2, 1.0, 1.0) == pytest.approx(B)
        assert grid_max(lambda y, z: abs(2 * (y - z)), 1.0, 1.0) == pytest.approx(G)

    def test_logistic_example(self):
        B, G = LossSpec("logistic_l2").bound_constants(2.0)
        assert B == pytest.approx(math.log(1 + math.e ** 2)) and B == pytest.approx(2.1269, abs=1e-4)
        assert G == 1.0
        assert grid_max(lambda y, _: math.log1p(math.exp(-y)), 2.0) == pytest.approx(B)
        assert grid_max(lambda y, _: 1 / (1 + math.exp(y)), 2.0) <= G

    def test_hinge_example(self):
        B, G = LossSpec("hinge_l2").bound_constants(2.0)
        assert (B, G) == (3.0, 1.0)
        assert grid_max(lambda y, _: max(0, 1 - y), 2.0) == pytest.approx(B)

    @pytest.mark.parametrize("kind,reg,m", ALL)
    def test_bounds_hold_on_ball(self, kind, reg, m, rng):
        Y = 1.5
        spec = LossSpec(kind, reg, m, domain_bound=Y, target_bound=1.0)
        B, G = spec.bound_constants()
        for _ in range(300):
            y = rng.normal(size=m)
            y *= Y * rng.uniform() ** (1 / m) / np.linalg.norm(y)
            s = random_supervision(kind, m, rng)
            if kind in ("square", "l1"):
                s = s / max(1.0, np.linalg.norm(s))
            assert abs(spec.value(s, y)) <= B + 1e-12
            assert np.linalg.norm(spec.gradient(s, y)) <= G + 1e-12


class TestCalculus:
    @pytest.mark.parametrize("kind,reg,m", SMOOTH)
    def test_finite_difference_gradient(self, kind, reg, m, rng):
        spec = LossSpec(kind, reg, m, domain_bound=3.0)
        eps = 1e-5
        for _ in range(100):
            s = random_supervision(kind, m, rng)
            y = rng.uniform(-2, 2, m)
            g = spec.gradient(s, y)
            for j in range(m):
                e = np.zeros(m)
                e[j] = eps
                fd = (spec.value(s, y + e) - spec.value(s, y - e)) / (2 * eps)
                assert fd == pytest.approx(g[j], abs=1e-5)

    @pytest.mark.parametrize("kind,reg,m", ALL)
    def test_convexity_sandwich(self, kind, reg, m, rng):
        Y = 2.0
        spec = LossSpec(kind, reg, m, domain_bound=Y)
        lam, beta = spec.convexity_constants()
        for _ in range(500):
            s = random_supervision(kind, m, rng)
            a, b = rng.uniform(-Y / math.sqrt(m), Y / math.sqrt(m), (2, m))
            gap = spec.value(s, a) - spec.value(s, b) - spec.gradient(s, b) @ (a - b)
            dist = float((a - b) @ (a - b))
            assert gap >= lam / 2 * dist - 1e-8
            if beta is not None:
                assert gap <= beta / 2 * dist + 1e-8

    @pytest.mark.parametrize("kind,reg,m", [k for k in ALL if k[1] > 0 or k[0] != "l1"])
    def test_gradient_norm_controls_suboptimality(self, kind, reg, m, rng):
        spec = LossSpec(kind, reg, m, domain_bound=3.0)
        lam = spec.lambda_sc
        for _ in range(50):
            s = random_supervision(kind, m, rng)
            y = rng.uniform(-1, 1, m)
            best = minimize(lambda v: spec.value(s, v), np.zeros(m), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000}).fun
            g = spec.gradient(s, y)
            assert g @ g >= 2 * lam * (spec.value(s, y) - best) - 1e-8

    @pytest.mark.parametrize("kind,m", [("hinge_l2", 1), ("l1", 3)])
    def test_kink_subgradient_valid(self, kind, m, rng):
        spec = LossSpec(kind, 0.1, m)
        for _ in range(100):
            s = random_supervision(kind, m, rng)
            y = s.copy() if kind == "l1" else s.copy()  # exactly on the kink
            g = spec.gradient(s, y)
            for _ in range(10):
                x = rng.uniform(-3, 3, m)
                assert spec.value(s, x) >= spec.value(s, y) + g @ (x - y) - 1e-12


class TestOptimalPredictions:
    def test_square_is_target(self):
        spec = LossSpec("square", m=2, domain_bound=10.0)
        np.testing.assert_allclose(spec.optimal_predictions([[1.0, 2.0]]), [[1.0, 2.0]])

    def test_hinge_regularised(self):
        spec = LossSpec("hinge_l2", 1.0, domain_bound=5.0)
        np.testing.assert_allclose(spec.optimal_predictions([[1.0], [-1.0]]), [[0.5], [-0.5]])

    @pytest.mark.parametrize("kind,reg,m", [("logistic_l2", 0.1, 1), ("multiclass_ce", 0.1, 3)])
    def test_no_better_point_nearby(self, kind, reg, m, rng):
        spec = LossSpec(kind, reg, m, domain_bound=4.0)
        s = random_supervision(kind, m, rng)
        best = spec.optimal_predictions([s])[0]
        for _ in range(200):
            y = best + rng.normal(scale=0.05, size=m)
            assert spec.value(s, y) >= spec.value(s, best) - 1e-9


def test_all_public_kinds_constructible():
    for kind in KINDS:
        LossSpec(kind, 0.1, 1 if kind in ("logistic_l2", "hinge_l2") else 2, domain_bound=1.0)

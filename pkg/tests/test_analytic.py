import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bisect_root, giant_root, golden_min
from swpotts.analytic import (DomainError, ModelParams, bu_residual, classify_fixpoints,
                              drift_f, drift_f_prime, drift_f_second, giant_fraction_g,
                              majority_fixpoint, psi1, psi1_prime, psi1_second, regime_of,
                              resolve_b, solve_x, threshold_bo, threshold_brc, threshold_bu,
                              threshold_bu_minimizer, thresholds)


def f_oracle(z, q, B):
    if z * B <= 1.0:
        return 1.0 / q
    x = bisect_root(lambda x: x + math.exp(-z * B * x) - 1.0, 1e-12, 1.0)
    return 1.0 / q + (1.0 - 1.0 / q) * z * x


def psi1_prime_oracle(a, q, B):
    return -math.log((q - 1) * a / (1 - a)) + B * (a - (1 - a) / (q - 1))


# ---------------------------------------------------------------- thresholds

def test_bu_q3_matches_golden_section():
    z0, bu = golden_min(lambda z: z + 3 * z / math.expm1(z), 1e-9, 20.0)
    assert threshold_bu(3) == pytest.approx(bu, abs=1e-9)
    assert threshold_bu(3) == pytest.approx(2.7456, abs=5e-5)
    assert threshold_bu_minimizer(3) == pytest.approx(z0, abs=1e-5)
    assert abs(threshold_bu_minimizer(3) - 1.03) < 0.01


def test_bu_residual_small():
    for q in (3, 4, 5, 10, 50):
        assert abs(bu_residual(q)) <= 1e-8


def test_bo_values():
    assert threshold_bo(3) == pytest.approx(4 * math.log(2), abs=1e-12)
    assert threshold_bo(4) == pytest.approx(3 * math.log(3), abs=1e-12)


def test_brc_values():
    assert threshold_brc(3) == 3.0
    assert threshold_brc(7) == 7.0


@pytest.mark.parametrize("q", range(3, 51))
def test_threshold_ordering(q):
    th = thresholds(q)
    assert th.b_u < th.b_o < th.b_rc


def test_brc_is_where_uniform_leaves_flat_piece():
    # below q the point 1/q sits inside the flat piece z <= 1/B, above q it does not
    q = 3
    for B in (2.9, 2.99):
        P = ModelParams(q, B)
        assert drift_f(1 / q + 1e-4, P) == pytest.approx(1 / q, abs=0)
    assert drift_f(1 / q + 1e-4, ModelParams(q, 3.01)) > 1 / q


def test_threshold_domain_errors():
    with pytest.raises(DomainError):
        threshold_bu(2)
    with pytest.raises(DomainError):
        threshold_bo(2.5)
    with pytest.raises(DomainError):
        ModelParams(3, -1.0)


def test_resolve_keywords():
    assert resolve_b(3, "bu") == threshold_bu(3)
    assert resolve_b(3, "BRC") == 3.0
    assert resolve_b(3, "2.5") == 2.5
    with pytest.raises(ValueError):
        resolve_b(3, "nope")


# ---------------------------------------------------------------- x, F, g

def test_solve_x_examples():
    assert solve_x(0.2, 3.0) == 0.0
    assert solve_x(1.0, 2.0) == pytest.approx(giant_root(2.0), abs=1e-12)
    assert solve_x(1.0, 2.0) == pytest.approx(0.7968, abs=1e-4)
    assert solve_x(0.5, 3.0) == pytest.approx(giant_root(1.5), abs=1e-12)


@given(st.floats(1.0 + 1e-9, 40.0))
@settings(max_examples=200, deadline=None)
def test_solve_x_residual(c):
    x = solve_x(1.0, c)
    assert 0.0 < x < 1.0
    assert abs(x + math.exp(-c * x) - 1.0) <= 1e-12


def test_solve_x_near_tangency_is_small_and_positive():
    for eps in (1e-3, 1e-6, 1e-8, 1e-10):
        x = solve_x(1.0, 1.0 + eps)
        # x ~ 2 eps for c = 1 + eps
        assert x == pytest.approx(2 * eps, rel=0.01)


def test_drift_f_examples():
    P = ModelParams(3, 2.5)
    assert drift_f(1 / 3, P) == 1 / 3
    bu = threshold_bu(3)
    a = majority_fixpoint(ModelParams(3, bu))
    assert drift_f(a, ModelParams(3, bu)) == pytest.approx(a, abs=1e-9)
    x = giant_root(3.6)
    assert drift_f(0.9, ModelParams(3, 4.0)) == pytest.approx(1 / 3 + (2 / 3) * 0.9 * x, abs=1e-12)


@given(st.sampled_from([3, 4, 10]), st.floats(1.0, 12.0), st.floats(0.0, 1.0))
@settings(max_examples=300, deadline=None)
def test_drift_f_matches_oracle(q, B, t):
    z = 1 / q + t * (1 - 1 / q)
    P = ModelParams(q, B)
    assert drift_f(z, P) == pytest.approx(f_oracle(z, q, B), abs=1e-11)
    assert abs(drift_f(z, P) - (1 / q + (1 - 1 / q) * giant_fraction_g(z, B))) <= 1e-12


def test_giant_fraction_examples():
    assert giant_fraction_g(1 / 2.5, 2.5) == 0.0
    assert giant_fraction_g(0.5, 4.0) > 0.25
    assert giant_fraction_g(1.0, 2.0) == pytest.approx(giant_root(2.0), abs=1e-12)


@pytest.mark.parametrize("q", [3, 4, 10])
def test_f_prime_matches_finite_difference(q):
    for B in (threshold_bu(q), threshold_bo(q), q, q + 1.0):
        P = ModelParams(q, B)
        for z in np.linspace(max(1 / B, 1 / q) + 0.01, 0.99, 40):
            h = 1e-6
            fd = (drift_f(z + h, P) - drift_f(z - h, P)) / (2 * h)
            assert drift_f_prime(z, P) == pytest.approx(fd, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("q", [3, 4, 10])
def test_f_second_matches_finite_difference(q):
    for B in (threshold_bu(q), threshold_bo(q), q, q + 1.0):
        P = ModelParams(q, B)
        for z in np.linspace(max(1 / B, 1 / q) + 0.02, 0.98, 40):
            h = 1e-5
            fd = (drift_f_prime(z + h, P) - drift_f_prime(z - h, P)) / (2 * h)
            assert drift_f_second(z, P) == pytest.approx(fd, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("q", [3, 4, 10])
def test_f_increasing_and_concave(q):
    for B in (threshold_bu(q), threshold_bo(q), q, q + 1.0):
        P = ModelParams(q, B)
        for z in np.linspace(max(1 / B, 1 / q) + 1e-6, 1.0, 200):
            if z > 1.0:
                continue
            assert drift_f_prime(z, P) > 0
            assert drift_f_second(z, P) < 0


def test_f_prime_right_limit_at_brc():
    q = 3
    P = ModelParams(q, 3.0)
    assert drift_f_prime(1 / 3, P, side="right") == pytest.approx(4 / 3, abs=1e-6)
    assert drift_f_prime(1 / 3 + 1e-7, P) == pytest.approx(4 / 3, abs=1e-6)
    assert drift_f_prime(1 / 3, P, side="left") == 0.0
    with pytest.raises(DomainError):
        drift_f_prime(1 / 3, P)


def test_f_prime_is_one_at_bu_fixpoint():
    bu = threshold_bu(3)
    P = ModelParams(3, bu)
    a = majority_fixpoint(P)
    assert drift_f_prime(a, P) == pytest.approx(1.0, abs=1e-8)


# ---------------------------------------------------------------- Psi_1

def test_psi1_uniform_value():
    assert psi1(1 / 3, ModelParams(3, 2.0)) == pytest.approx(math.log(3) + 1 / 3, abs=1e-14)


@pytest.mark.parametrize("q", [3, 4, 7])
def test_psi1_second_zero_at_brc_and_prime_zero_at_uniform(q):
    assert psi1_second(1 / q, ModelParams(q, float(q))) == pytest.approx(0.0, abs=1e-12)
    for B in (1.0, 2.0, 5.0):
        assert psi1_prime(1 / q, ModelParams(q, B)) == pytest.approx(0.0, abs=1e-12)


def test_psi1_derivatives_match_finite_difference():
    P = ModelParams(3, 2.8)
    for a in np.linspace(0.05, 0.95, 37):
        h = 1e-6
        assert psi1_prime(a, P) == pytest.approx((psi1(a + h, P) - psi1(a - h, P)) / (2 * h), abs=1e-6)
        assert psi1_second(a, P) == pytest.approx(
            (psi1_prime(a + h, P) - psi1_prime(a - h, P)) / (2 * h), abs=1e-5)


def test_psi1_domain():
    with pytest.raises(DomainError):
        psi1(0.0, ModelParams(3, 2.0))
    with pytest.raises(DomainError):
        psi1_prime(1.0, ModelParams(3, 2.0))


# ---------------------------------------------------------------- fixpoints

def test_majority_none_below_bu():
    assert majority_fixpoint(ModelParams(3, 2.0)) is None


def test_majority_at_bu_is_double_root():
    bu = threshold_bu(3)
    P = ModelParams(3, bu)
    a = majority_fixpoint(P)
    assert drift_f_prime(a, P) == pytest.approx(1.0, abs=1e-6)
    assert psi1_second(a, P) == pytest.approx(0.0, abs=1e-6)
    assert abs(psi1_prime(a, P)) <= 1e-9


def test_majority_at_b3_matches_bisection_oracle():
    q, B = 3, 3.0
    a0 = 0.5 + math.sqrt(0.25 - (q - 1) / (q * B))
    ref = bisect_root(lambda a: psi1_prime_oracle(a, q, B), a0, 1 - 1e-9)
    assert majority_fixpoint(ModelParams(q, B)) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("q", [3, 4, 10])
def test_majority_residuals_and_bounds(q):
    bu = threshold_bu(q)
    for B in (bu + 1e-3, threshold_bo(q), (bu + q) / 2, q, q + 1.0, 2 * q):
        P = ModelParams(q, B)
        a = majority_fixpoint(P)
        assert a > 1 / q
        assert abs(drift_f(a, P) - a) <= 1e-9
        assert abs(psi1_prime(a, P)) <= 1e-9
        assert a * B > 1
        assert (1 - a) * B / (q - 1) < 1
        # hessian / jacobian agree in sign
        assert (drift_f_prime(a, P) - 1 > 0) == (psi1_second(a, P) > 0)


def test_majority_is_the_larger_root():
    q, B = 3, threshold_bo(3)
    P = ModelParams(q, B)
    a = majority_fixpoint(P)
    # Psi_1' has two roots above 1/q in (B_u, B_rc); the other one is smaller and a local minimum
    a0 = 0.5 + math.sqrt(0.25 - (q - 1) / (q * B))
    small = bisect_root(lambda t: psi1_prime_oracle(t, q, B), 1 / q + 1e-6, a0)
    assert small < a
    assert psi1_second(a, P) < 0 < psi1_second(small, P)


def test_psi1_equal_maxima_at_bo():
    q = 3
    P = ModelParams(q, threshold_bo(q))
    a = majority_fixpoint(P)
    assert psi1(a, P) == pytest.approx(psi1(1 / q, P), abs=1e-8)


STABILITY_TABLE = {
    # regime: (uniform class, majority class or None)
    "B<B_u": ("attractive", None),
    "B=B_u": ("attractive", "repulsive (not jacobian repulsive)"),
    "B_u<B<B_rc": ("attractive", "attractive"),
    "B=B_rc": ("repulsive", "attractive"),
    "B>B_rc": ("not-a-fixpoint", "attractive"),
}


@pytest.mark.parametrize("q", [3, 4, 10])
def test_classification_table(q):
    bu, brc = threshold_bu(q), float(q)
    cases = [(bu - 0.2, "B<B_u"), (bu, "B=B_u"), ((bu + brc) / 2, "B_u<B<B_rc"),
             (brc, "B=B_rc"), (brc + 1, "B>B_rc")]
    for B, regime in cases:
        rep = classify_fixpoints(ModelParams(q, B))
        assert rep.regime == regime
        uni, maj = STABILITY_TABLE[regime]
        assert rep.uniform["class"] == uni
        if maj is None:
            assert rep.majority is None
        else:
            assert rep.majority["class"] == maj
        assert not [w for w in rep.warnings if "mismatch" in w]


def test_classify_examples():
    rep = classify_fixpoints(ModelParams(3, 2.76))
    assert rep.regime == "B_u<B<B_rc"
    assert rep.uniform["class"] == "attractive" and rep.majority["class"] == "attractive"
    rep = classify_fixpoints(ModelParams(3, 3.0))
    assert rep.uniform["jacobian"] == pytest.approx(4 / 3)


def test_proximity_warning():
    bu = threshold_bu(3)
    with pytest.warns(RuntimeWarning):
        rep = classify_fixpoints(ModelParams(3, bu + 5e-10))
    assert rep.regime == "B=B_u"
    assert rep.warnings


def test_ising_regime():
    rep = classify_fixpoints(ModelParams(2, 1.5))
    assert rep.regime == "ising: all thresholds equal"
    assert regime_of(3, 1.0)[0] == "B<B_u"

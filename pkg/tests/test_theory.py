import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdsa import theory
from rdsa.errors import ConfigError
from rdsa.objectives import Objective, fourth_order_objective, quadratic_objective, triangular_matrix
from rdsa.perturbation import PerturbationDist

UNIF = PerturbationDist.uniform(1.0)
ASYM = PerturbationDist.asym_bernoulli(0.01)
SPSA = PerturbationDist.sym_bernoulli()


def test_constants():
    assert theory.k_mu(UNIF) == 3.6
    assert theory.k_mu(PerturbationDist.uniform(2.5)) == 3.6
    assert theory.k_mu(SPSA) == 2.0
    assert theory.k_mu(PerturbationDist.gaussian()) == 6.0
    assert theory.fourth_moment_ratio(ASYM) == pytest.approx(1.000099, abs=5e-7)
    assert theory.bias_multiplier(UNIF) == pytest.approx(3.24)
    assert theory.bias_multiplier(ASYM) == pytest.approx(1.000099**2, abs=2e-6)
    assert theory.measurement_ratio(0.01) == pytest.approx((1.8, 1.01, 3.0, 1.0))
    with pytest.raises(ConfigError):
        theory.measurement_ratio(0.0)


def test_inputs_validation():
    with pytest.raises(ConfigError):
        theory.AsymptoticInputs(-np.eye(2), np.zeros(2), 0.1)
    with pytest.raises(ConfigError):
        theory.AsymptoticInputs(np.eye(2), np.zeros(3), 0.1)
    with pytest.raises(ConfigError):
        theory.AsymptoticInputs(np.eye(2), np.zeros(2), 0.1, alpha=0.3, gamma=0.2)
    with pytest.raises(ConfigError):
        theory.AsymptoticInputs(np.eye(2), np.zeros(2), -1.0)
    inp = theory.AsymptoticInputs(np.eye(2), np.ones(2), 0.1)
    assert inp.beta == pytest.approx(2 / 3) and inp.beta_plus == inp.beta and inp.biased
    assert not theory.AsymptoticInputs(np.eye(2), np.ones(2), 0.1, gamma=0.2).biased
    assert theory.AsymptoticInputs(np.eye(2), np.ones(2), 0.1, alpha=0.9, gamma=0.15).beta_plus == 0.0


def test_first_order_scalar_closed_form():
    h, t, s2, a0, d0 = 2.0, 0.7, 0.04, 1.5, 0.8
    inp = theory.AsymptoticInputs(np.array([[h]]), np.array([t]), s2, a0=a0, delta0=d0)
    denom = 2 * a0 * h - inp.beta_plus
    mu = 3.6 * a0 * d0**2 * t / denom
    var = a0**2 * s2 / (4 * d0**2 * denom)
    assert np.allclose(theory.mean_first_order(inp, UNIF), [mu])
    assert np.allclose(theory.covariance_first_order(inp), [[var]])
    assert theory.amse_first_order(inp, UNIF) == pytest.approx(mu**2 + var)
    unbiased = theory.AsymptoticInputs(np.array([[h]]), np.array([t]), s2, a0=a0, delta0=d0, gamma=0.2)
    assert np.all(theory.mean_first_order(unbiased, UNIF) == 0)


def test_second_order_matches_a_b_decomposition(rng):
    B = rng.standard_normal((4, 4))
    H = B @ B.T + np.eye(4)
    inp = theory.AsymptoticInputs(H, rng.standard_normal(4), 0.01, delta0=1.3)
    A, Bv = theory.amse_terms(inp)
    for dist in (UNIF, ASYM, SPSA):
        assert theory.amse_second_order(inp, dist) == pytest.approx(theory.bias_multiplier(dist) * A + Bv)
    assert theory.amse_iterate_averaging(inp) == pytest.approx(theory.amse_second_order(inp, UNIF))
    assert theory.amse_second_order(inp, ASYM) < theory.amse_second_order(inp, UNIF)


def test_simulation_ratio():
    A, B = 0.3, 1.1
    assert theory.simulation_ratio_vs_2spsa(UNIF, A, B) == pytest.approx(1 + (5.72 * A - B) / (4 * A + 4 * B))
    assert theory.simulation_ratio_vs_2spsa(ASYM, 0.0, 1.0) == pytest.approx(0.75)
    with pytest.raises(ConfigError):
        theory.simulation_ratio_vs_2spsa(ASYM, -1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(A=st.floats(0, 1e6), B=st.floats(1e-9, 1e6), eps=st.floats(1e-6, 0.3))
def test_asym_bernoulli_always_cheaper_than_2spsa(A, B, eps):
    assert theory.simulation_ratio_vs_2spsa(PerturbationDist.asym_bernoulli(eps), A, B) < 1


def test_omega_scalar():
    inp = theory.AsymptoticInputs(np.array([[2.0]]), np.array([0.0]), 0.04)
    expected = 0.04 / (4 * 0.5**2 * (8 - 4 * inp.beta_plus)) / 4.0
    assert np.allclose(theory.omega_second_order(inp, 0.5), [[expected]])
    with pytest.raises(ConfigError):
        theory.omega_second_order(inp, 0.0)


def _analytic_T(n):
    """T for the fourth-order objective at 0: third partials are 0.6 sum_j A_ja A_jb A_jc."""
    A = triangular_matrix(n)
    F = 0.6 * np.einsum("ja,jb,jc->abc", A, A, A)
    diag = np.einsum("lll->l", F)
    return -(diag + 3 * (np.einsum("iil->l", F) - diag)) / 6.0  # the sum skips i == l


@pytest.mark.parametrize("n", [1, 3, 10])
def test_third_derivative_contraction(n):
    assert np.allclose(theory.third_deriv_T(fourth_order_objective(n)), _analytic_T(n), atol=1e-10)
    assert np.allclose(theory.third_deriv_T(quadratic_objective(n)), 0.0, atol=1e-8)


def test_third_derivative_needs_a_point():
    obj = Objective(name="cubic", dim=1, func=lambda x: np.sum(x**3))
    with pytest.raises(ConfigError):
        theory.third_deriv_T(obj)
    # One coordinate: the mixed sum is empty and f''' = 6, so T = -1 everywhere.
    assert theory.third_deriv_T(obj, np.array([0.4])) == pytest.approx([-1.0])

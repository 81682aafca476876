import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rdsa import estimators as est
from rdsa.objectives import quadratic_objective
from rdsa.perturbation import PerturbationDist, make_stream, sample_direction


def test_frozen_gradient_values():
    # 3 d (y+ - y-) / (2 delta) with eta = 1.
    g = est.grad_rdsa_unif(2.0, 1.0, np.array([-0.5, 0.5]), 1.0, 1.0)
    assert np.allclose(g.g, [-0.75, 0.75]) and g.measurements_used == 2
    # d (y+ - y-) / (2 delta (1 + eps)) with eps = 1.
    assert np.allclose(est.grad_rdsa_asymber(13.0, 1.0, np.array([2.0, -1.0]), 1.0, 1.0).g, [6.0, -3.0])
    assert np.allclose(est.grad_rdsa_gauss(3.0, 1.0, np.array([1.0, -2.0]), 0.5).g, [2.0, -4.0])
    assert np.allclose(est.grad_spsa(3.0, 1.0, np.array([1.0, -1.0]), 0.5).g, [2.0, -2.0])


def test_frozen_hessian_values():
    # (9/2)(5/2)(0.25 - 1/3) * 0.5 = -0.46875
    H = est.hess_rdsa_unif(1.0, 0.0, 0.25, np.array([0.5, 0.0]), 1.0, 1.0)
    assert np.allclose(H.H, [[-0.46875, 0.0], [0.0, 9 / 2 * 5 / 2 * (-1 / 3) * 0.5]])
    assert H.measurements_used == 3
    # eps = 1: kappa = 2, off-diagonal scale 1/8, second difference 8.
    H = est.hess_rdsa_asymber(4.0, 4.0, 0.0, np.array([2.0, -1.0]), 1.0, 1.0)
    assert np.allclose(H.H, [[8.0, -2.0], [-2.0, -4.0]])
    assert est.kappa(1.0) == pytest.approx(2.0)


def test_dispatchers():
    d = np.array([0.3, -0.2])
    assert np.array_equal(
        est.grad_rdsa(1.0, 0.0, d, 0.1, PerturbationDist.uniform(2.0)).g, est.grad_rdsa_unif(1.0, 0.0, d, 0.1, 2.0).g
    )
    assert np.array_equal(
        est.hess_rdsa(1.0, 0.0, 0.2, d, 0.1, PerturbationDist.asym_bernoulli(0.5)).H,
        est.hess_rdsa_asymber(1.0, 0.0, 0.2, d, 0.1, 0.5).H,
    )
    with pytest.raises(ValueError):
        est.grad_rdsa(1.0, 0.0, d, 0.1, PerturbationDist.sym_bernoulli())
    with pytest.raises(ValueError):
        est.hess_rdsa(1.0, 0.0, 0.0, d, 0.1, PerturbationDist.gaussian())


def test_argument_validation():
    with pytest.raises(ValueError):
        est.grad_rdsa_unif(1.0, 0.0, np.ones(2), 0.0, 1.0)
    with pytest.raises(ValueError):
        est.grad_spsa(1.0, 0.0, np.array([1.0, 0.0]), 0.1)
    with pytest.raises(ValueError):
        est.hess_rdsa_asymber(1.0, 0.0, 0.0, np.ones(2), 0.1, -1.0)
    with pytest.raises(ValueError):
        est.hess_2spsa(1, 0, 1, 0, np.ones(2), np.zeros(2), 0.1, 0.1)


def test_two_spsa_is_exact_for_one_dimensional_quadratic():
    f = lambda x: 1.5 * x**2 - x  # noqa: E731
    for D, Dt in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)]:
        x, dl, dt = 0.3, 0.1, 0.07
        g, H = est.hess_2spsa(f(x + dl * D), f(x - dl * D), f(x + dl * D + dt * Dt), f(x - dl * D + dt * Dt),
                              np.array([D]), np.array([Dt]), dl, dt)
        assert H.H[0, 0] == pytest.approx(3.0, rel=1e-10)
        assert g.g[0] == pytest.approx(3 * x - 1, rel=1e-10)
        assert H.measurements_used == 4


@pytest.mark.parametrize("name", ["unif", "asym"])
def test_batched_inputs_match_single_calls(name, rng):
    d = rng.uniform(-1, 1, (5, 3))
    yp, ym, y0 = rng.standard_normal((3, 5))
    if name == "unif":
        gb = est.grad_rdsa_unif(yp, ym, d, 0.2, 1.0).g
        Hb = est.hess_rdsa_unif(yp, ym, y0, d, 0.2, 1.0).H
        single = [(est.grad_rdsa_unif(yp[i], ym[i], d[i], 0.2, 1.0).g, est.hess_rdsa_unif(yp[i], ym[i], y0[i], d[i], 0.2, 1.0).H) for i in range(5)]
    else:
        gb = est.grad_rdsa_asymber(yp, ym, d, 0.2, 0.3).g
        Hb = est.hess_rdsa_asymber(yp, ym, y0, d, 0.2, 0.3).H
        single = [(est.grad_rdsa_asymber(yp[i], ym[i], d[i], 0.2, 0.3).g, est.hess_rdsa_asymber(yp[i], ym[i], y0[i], d[i], 0.2, 0.3).H) for i in range(5)]
    for i, (g, H) in enumerate(single):
        assert np.allclose(gb[i], g) and np.allclose(Hb[i], H)


@pytest.mark.parametrize(
    "dist", [PerturbationDist.uniform(1.0), PerturbationDist.asym_bernoulli(1.0)], ids=["unif", "asym"]
)
def test_hessian_unbiased_on_quadratic_small_sample(dist):
    obj = quadratic_objective(3)
    x = np.array([0.2, -0.4, 1.0])
    d = sample_direction(dist, 3, make_stream(11), size=200_000)
    delta = 0.5
    H = est.hess_rdsa(obj(x + delta * d), obj(x - delta * d), np.full(d.shape[0], obj.eval(x)), d, delta, dist).H
    se = H.std(axis=0) / np.sqrt(d.shape[0])
    assert np.all(np.abs(H.mean(axis=0) - obj.hessian(x)) < 4.5 * se)


@settings(max_examples=60, deadline=None)
@given(
    d=arrays(float, 4, elements=st.floats(-1, 1)),
    yp=st.floats(-1e3, 1e3),
    ym=st.floats(-1e3, 1e3),
    y0=st.floats(-1e3, 1e3),
    delta=st.floats(1e-3, 10),
)
def test_estimate_structure(d, yp, ym, y0, delta):
    H = est.hess_rdsa_unif(yp, ym, y0, d, delta, 1.0).H
    assert np.array_equal(H, H.T)
    g = est.grad_rdsa_unif(yp, ym, d, delta, 1.0).g
    # Swapping the two measurements flips the gradient estimate.
    assert np.allclose(est.grad_rdsa_unif(ym, yp, d, delta, 1.0).g, -g)
    # The gradient is collinear with the direction.
    assert np.allclose(g, 3.0 * d * (yp - ym) / (2 * delta))

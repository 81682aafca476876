import numpy as np
import pytest

from rdsa import minimize
from rdsa.errors import ConfigError
from rdsa.objectives import NoisyOracle, fourth_order_objective, quadratic_objective
from rdsa.optimizer import (
    DEFAULT_BOX,
    FIRST_ORDER_SCHEDULE,
    SECOND_ORDER_SCHEDULE,
    Algorithm,
    AlgorithmConfig,
    Schedule,
    optimize,
    project_box,
    run_first_order,
    run_second_order,
    with_overrides,
)
from rdsa.perturbation import Kind, replication_streams

ALL = [a.value for a in Algorithm]


def _run(alg, budget=2000, sigma=0.001, seed=0, rep=0, obj=None, **kw):
    obj = obj or quadratic_objective(10)
    cfg = AlgorithmConfig(alg, np.ones(obj.dim), budget, **kw)
    dir_rng, noise_rng = replication_streams(seed, rep)
    oracle = NoisyOracle(obj, sigma, noise_rng)
    return cfg, oracle, optimize(cfg, oracle, dir_rng)


def test_schedules():
    assert FIRST_ORDER_SCHEDULE.step(1) == pytest.approx(1 / 51)
    assert FIRST_ORDER_SCHEDULE.perturbation(1) == pytest.approx(1.9)
    assert SECOND_ORDER_SCHEDULE.step(32) == pytest.approx(32**-0.6)
    assert SECOND_ORDER_SCHEDULE.perturbation(1000) == pytest.approx(3.8 / 1000**0.101)
    with pytest.raises(ConfigError):
        Schedule(a0=-1.0, A=0.0, alpha=1.0, delta0=1.0, gamma=0.1)


def test_algorithm_metadata():
    assert Algorithm.parse("2rdsa-asymber") is Algorithm.RDSA2_ASYMBER
    with pytest.raises(ConfigError):
        Algorithm.parse("3SPSA")
    assert [Algorithm.parse(a).measurements_per_iteration for a in ("1SPSA", "2SPSA", "2RDSA-Unif")] == [2, 4, 3]
    assert Algorithm.SPSA2.warm_start is Algorithm.SPSA1
    assert Algorithm.RDSA2_ASYMBER.warm_start is Algorithm.RDSA1_ASYMBER
    assert Algorithm.RDSA1_GAUSS.kind is Kind.GAUSSIAN


@pytest.mark.parametrize(
    "alg, plan", [("1SPSA", (0, 1000)), ("2SPSA", (200, 400)), ("2RDSA-Unif", (200, 533)), ("2RDSA-AsymBer", (200, 533))]
)
def test_iteration_plan_at_2000(alg, plan):
    cfg = AlgorithmConfig(alg, np.ones(10), 2000)
    assert cfg.iteration_plan() == plan
    assert cfg.expected_measurements() <= 2000


@pytest.mark.parametrize("alg", ALL)
def test_budget_ledger_matches_oracle(alg):
    cfg, oracle, state = _run(alg, budget=1000)
    assert oracle.count == state.measurements_spent == cfg.expected_measurements() <= 1000
    assert state.n == cfg.iteration_plan()[1]


def test_config_defaults_and_validation():
    cfg = AlgorithmConfig("2RDSA-AsymBer", np.ones(3), 500)
    assert cfg.epsilon == 1.0 and cfg.schedule == SECOND_ORDER_SCHEDULE and cfg.box == DEFAULT_BOX
    assert AlgorithmConfig("1RDSA-AsymBer", np.ones(3), 500).epsilon == 1e-4
    bad = [
        dict(budget=1),
        dict(budget=3, algorithm="2SPSA"),
        dict(box=(1.0, -1.0)),
        dict(warm_start_fraction=1.0),
        dict(pd_rule="nope"),
        dict(pd_floor_scale=0.0),
        dict(eta=-1.0, algorithm="1RDSA-Unif"),
        dict(x0=np.ones((2, 2))),
    ]
    for kw in bad:
        args = dict(algorithm="1SPSA", x0=np.ones(3), budget=100)
        args.update(kw)
        with pytest.raises(ConfigError):
            AlgorithmConfig(**args)
    with pytest.raises(ConfigError):
        with_overrides(cfg, budget=0)
    assert with_overrides(cfg, budget=800).budget == 800


def test_order_and_dimension_checks():
    obj = quadratic_objective(3)
    d, _ = replication_streams(0, 0)
    with pytest.raises(ConfigError):
        run_first_order(AlgorithmConfig("2SPSA", np.ones(3), 100), NoisyOracle(obj), d)
    with pytest.raises(ConfigError):
        run_second_order(AlgorithmConfig("1SPSA", np.ones(3), 100), NoisyOracle(obj), d)
    with pytest.raises(ConfigError):
        run_second_order(AlgorithmConfig("1RDSA-Gauss", np.ones(3), 100), NoisyOracle(obj), d)
    with pytest.raises(ConfigError):
        optimize(AlgorithmConfig("1SPSA", np.ones(4), 100), NoisyOracle(obj), d)


def test_project_box():
    assert np.array_equal(project_box([-3.0, 0.5, 3.0], (-2.048, 2.047)), [-2.048, 0.5, 2.047])
    x = np.array([5.0])
    assert project_box(x, None) is not x
    with pytest.raises(ConfigError):
        project_box(x, (1, 0))


@pytest.mark.parametrize("alg", ALL)
def test_runs_are_reproducible_and_improve(alg):
    _, _, a = _run(alg, budget=1000, seed=3)
    _, _, b = _run(alg, budget=1000, seed=3)
    assert np.array_equal(a.x, b.x)
    x_star = quadratic_objective(10).x_star
    assert np.sum((a.x - x_star) ** 2) < 0.5 * np.sum((np.ones(10) - x_star) ** 2)


def test_second_order_beats_first_order_on_quadratic():
    x_star = quadratic_objective(10).x_star
    err = {alg: np.mean([np.sum((_run(alg, rep=r)[2].x - x_star) ** 2) for r in range(5)]) for alg in ("1RDSA-AsymBer", "2RDSA-AsymBer")}
    assert err["2RDSA-AsymBer"] * 10 < err["1RDSA-AsymBer"]


def test_noise_does_not_change_directions():
    """Direction and noise streams are separate, so the sigma=0 path is the small-noise limit."""
    x_star = quadratic_objective(10).x_star
    x0 = _run("1SPSA", budget=400, sigma=0.0)[2].x
    x1 = _run("1SPSA", budget=400, sigma=1e-9)[2].x
    assert np.max(np.abs(x0 - x1)) < 1e-6
    assert np.sum((x0 - x_star) ** 2) > 0


def test_callback_and_history_of_iterates():
    seen = []
    cfg = AlgorithmConfig("2SPSA", np.ones(10), 1000)
    d, n = replication_streams(0, 0)
    optimize(cfg, NoisyOracle(quadratic_objective(10), 0.001, n), d, callback=lambda k, x: seen.append((k, x.copy())))
    assert [k for k, _ in seen] == list(range(1, cfg.iteration_plan()[1] + 1))


def test_hessian_state_and_warm_start():
    cfg, _, state = _run("2RDSA-Unif", budget=1000)
    assert state.warm_start_measurements == 2 * cfg.iteration_plan()[0] == 200
    assert state.H_bar.shape == (10, 10) and np.allclose(state.H_bar, state.H_bar.T)
    no_warm = _run("2RDSA-Unif", budget=1000, warm_start_fraction=0.0)[2]
    assert no_warm.warm_start_measurements == 0 and no_warm.n == 333


def test_spec_projection_rule_available():
    _, oracle, state = _run("2RDSA-AsymBer", budget=1000, pd_rule="shift", pd_floor_scale=1.0)
    assert oracle.count == state.measurements_spent and np.all(np.isfinite(state.x))


def test_iterate_averaging():
    cfg, _, state = _run("1RDSA-Unif", budget=1000, iterate_averaging=True)
    assert state.n_averaged == cfg.iteration_plan()[1]
    assert np.array_equal(state.x_final, state.x_avg)
    assert _run("1RDSA-Unif", budget=1000)[2].x_avg is None


def test_box_is_respected_on_fourth_order():
    obj = fourth_order_objective(10)
    lo, hi = DEFAULT_BOX
    seen = []
    cfg = AlgorithmConfig("1SPSA", np.full(10, 2.0), 600)
    d, n = replication_streams(1, 0)
    optimize(cfg, NoisyOracle(obj, 0.001, n), d, callback=lambda k, x: seen.append(x))
    assert all(np.all((x >= lo) & (x <= hi)) for x in seen)


def test_minimize_wrapper():
    state = minimize(lambda x: float((x - 0.5) @ (x - 0.5)), np.zeros(3), budget=1200, algorithm="2RDSA-Unif")
    assert np.allclose(state.x, 0.5, atol=0.05)

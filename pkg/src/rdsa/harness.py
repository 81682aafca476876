"""
Replicated Monte-Carlo experiments over the benchmark objectives.

An :class:`ExperimentSpec` names an objective, a noise level, a list of
algorithms and measurement budgets, and a replication count. Every
(algorithm, budget) cell is run ``replications`` times; replication ``r`` draws
its perturbation directions and measurement noise from streams keyed by
``(seed, r)``, so cells share common random numbers and results do not depend
on worker scheduling. Aggregation always runs in replication order.

Config files use :mod:`configparser` syntax. Each section other than
``[DEFAULT]`` is one experiment; keys in ``[DEFAULT]`` are shared::

    [DEFAULT]
    objective = quadratic
    dim = 10
    sigma = 0.001
    replications = 100
    seed = 0

    [table2]
    algorithms = 1SPSA, 1RDSA-Unif, 1RDSA-AsymBer, 2SPSA, 2RDSA-Unif, 2RDSA-AsymBer
    budgets = 1000, 2000

Recognised keys: ``objective``, ``dim``, ``sigma``, ``algorithms``,
``budgets``, ``replications``, ``seed``, ``eta``, ``epsilon``,
``epsilon_first``, ``epsilon_second``, ``metrics``, ``pd_rule``,
``pd_floor_scale``, ``iterate_averaging``, ``warm_start_fraction``, ``box``
(``lo, hi`` or ``none``), ``epsilons`` (sweep grid), and schedule overrides
``first.a0``, ``first.A``, ``first.alpha``, ``first.delta0``, ``first.gamma``
and the same with the ``second.`` prefix.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, NumericalError
from .objectives import NoisyOracle, Objective, fourth_order_objective, quadratic_objective
from .optimizer import (
    DEFAULT_BOX,
    DEFAULT_PD_FLOOR_SCALE,
    DEFAULT_PD_RULE,
    FIRST_ORDER_SCHEDULE,
    SECOND_ORDER_SCHEDULE,
    Algorithm,
    AlgorithmConfig,
    Schedule,
    optimize,
)
from .perturbation import Kind, replication_streams

__all__ = [
    "CSV_COLUMNS",
    "ExperimentSpec",
    "METRICS",
    "OBJECTIVES",
    "RunResult",
    "emit",
    "format_csv",
    "format_jsonl",
    "format_markdown",
    "load_config",
    "make_objective",
    "run_experiment",
    "spec_from_mapping",
    "spec_to_dict",
    "sweep_epsilon",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "objective", "algorithm", "sigma", "budget", "n_end",
    "replications", "metric", "mean", "stderr", "seed",
)
METRICS = ("nmse", "fval")
OBJECTIVES = {"quadratic": quadratic_objective, "fourth_order": fourth_order_objective}
FORMATS = ("csv", "markdown", "jsonl")


@lru_cache(maxsize=None)
def make_objective(name: str, dim: int) -> Objective:
    """Build a named benchmark objective (cached per process)."""
    key = name.strip().lower().replace("-", "_")
    if key in ("fourth", "quartic"):
        key = "fourth_order"
    if key not in OBJECTIVES:
        raise ConfigError(f"objective: unknown name {name!r} (known: {', '.join(OBJECTIVES)})")
    if dim < 1:
        raise ConfigError(f"dim: must be at least 1, got {dim}")
    return OBJECTIVES[key](int(dim))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a grid of (algorithm, budget) cells on one objective.

    ``epsilon`` (if given) overrides the asymmetric Bernoulli parameter for
    every algorithm; otherwise ``epsilon_first`` / ``epsilon_second`` apply by
    algorithm order. ``first_schedule`` drives first-order runs and the warm
    start of second-order runs; ``second_schedule`` drives the Newton phase.
    """

    objective: str = "quadratic"
    dim: int = 10
    sigma: float = 0.001
    algorithms: Tuple[str, ...] = ("1SPSA", "1RDSA-Unif", "1RDSA-AsymBer", "2SPSA", "2RDSA-Unif", "2RDSA-AsymBer")
    budgets: Tuple[int, ...] = (2000,)
    replications: int = 100
    seed: int = 0
    eta: float = 1.0
    epsilon: Optional[float] = None
    epsilon_first: float = 1e-4
    epsilon_second: float = 1.0
    metrics: Tuple[str, ...] = ("nmse",)
    first_schedule: Schedule = FIRST_ORDER_SCHEDULE
    second_schedule: Schedule = SECOND_ORDER_SCHEDULE
    box: Optional[Tuple[float, float]] = DEFAULT_BOX
    warm_start_fraction: float = 0.2
    iterate_averaging: bool = False
    pd_rule: str = DEFAULT_PD_RULE
    pd_floor_scale: float = DEFAULT_PD_FLOOR_SCALE
    x0: Optional[Tuple[float, ...]] = None
    name: str = "experiment"

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("algorithms", tuple(Algorithm.parse(a).value for a in _as_tuple(self.algorithms)))
        set_("budgets", tuple(int(b) for b in _as_tuple(self.budgets)))
        set_("metrics", tuple(str(m).strip().lower() for m in _as_tuple(self.metrics)))
        if self.replications < 1:
            raise ConfigError(f"replications: must be at least 1, got {self.replications}")
        if self.seed < 0:
            raise ConfigError(f"seed: must be non-negative, got {self.seed}")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ConfigError(f"sigma: must be non-negative, got {self.sigma}")
        for m in self.metrics:
            if m not in METRICS:
                raise ConfigError(f"metrics: unknown metric {m!r} (known: {', '.join(METRICS)})")
        objective = make_objective(self.objective, self.dim)
        if "nmse" in self.metrics and objective.x_star is None:
            raise ConfigError(f"metrics: objective {self.objective!r} has no known optimum, NMSE unavailable")
        if self.x0 is not None:
            set_("x0", tuple(float(v) for v in self.x0))
            if len(self.x0) != self.dim:
                raise ConfigError(f"x0: expected {self.dim} coordinates, got {len(self.x0)}")
        for alg in self.algorithms:
            for budget in self.budgets:
                try:
                    self.config(alg, budget)
                except ConfigError as exc:
                    raise ConfigError(f"budgets: {exc}") from exc

    @property
    def objective_fn(self) -> Objective:
        return make_objective(self.objective, self.dim)

    def start(self) -> np.ndarray:
        return np.ones(self.dim) if self.x0 is None else np.array(self.x0)

    def epsilon_for(self, alg: Algorithm) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return self.epsilon_first if alg.order == 1 else self.epsilon_second

    def config(self, algorithm, budget: int) -> AlgorithmConfig:
        """The optimizer configuration for one cell."""
        alg = Algorithm.parse(algorithm)
        return AlgorithmConfig(
            algorithm=alg,
            x0=self.start(),
            budget=int(budget),
            schedule=self.first_schedule if alg.order == 1 else self.second_schedule,
            warm_schedule=self.first_schedule,
            eta=self.eta,
            epsilon=self.epsilon_for(alg),
            box=self.box,
            warm_start_fraction=self.warm_start_fraction,
            iterate_averaging=self.iterate_averaging,
            pd_rule=self.pd_rule,
            pd_floor_scale=self.pd_floor_scale,
        )


def _as_tuple(value) -> tuple:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if isinstance(value, Iterable):
        return tuple(value)
    return (value,)


@dataclass
class RunResult:
    """Per-replication outcomes for one (algorithm, budget) cell."""

    objective: str
    algorithm: str
    sigma: float
    budget: int
    n_end: int
    replications: int
    seed: int
    nmse: Optional[np.ndarray]
    fval: np.ndarray
    measurements: np.ndarray
    wall_clock: float = 0.0
    epsilon: Optional[float] = None

    def values(self, metric: str) -> np.ndarray:
        if metric == "nmse":
            if self.nmse is None:
                raise ConfigError("NMSE is unavailable without a known optimum")
            return self.nmse
        if metric == "fval":
            return self.fval
        raise ConfigError(f"unknown metric {metric!r}")

    def mean(self, metric: str = "nmse") -> float:
        return math.fsum(self.values(metric)) / self.replications

    def stderr(self, metric: str = "nmse") -> float:
        """Sample standard deviation over ``sqrt(replications)``; 0 for one replication."""
        v = self.values(metric)
        if v.size < 2:
            return 0.0
        m = self.mean(metric)
        var = math.fsum((v - m) ** 2) / (v.size - 1)
        return math.sqrt(var / v.size)


def _replication(task) -> Tuple[float, float, int]:
    """Run one replication; returns ``(squared error, f(x_end), measurements)``."""
    objective_name, dim, sigma, config, seed, rep = task
    objective = make_objective(objective_name, dim)
    dir_rng, noise_rng = replication_streams(seed, rep)
    oracle = NoisyOracle(objective, sigma, noise_rng if sigma > 0 else None)
    state = optimize(config, oracle, dir_rng)
    if oracle.count != state.measurements_spent:
        raise RuntimeError(
            f"measurement ledger mismatch: oracle counted {oracle.count}, loop reported {state.measurements_spent}"
        )
    x = state.x_final
    sq_err = float("nan") if objective.x_star is None else float(np.sum((x - objective.x_star) ** 2))
    return sq_err, objective.eval(x), state.measurements_spent


def _default_parallel() -> int:
    env = os.environ.get("RDSA_PARALLEL")
    if env is None or env.strip() == "":
        return 1
    try:
        value = int(env)
    except ValueError as exc:
        raise ConfigError(f"RDSA_PARALLEL must be an integer, got {env!r}") from exc
    return max(1, value if value > 0 else (os.cpu_count() or 1))


def _run_cell(spec: ExperimentSpec, alg: Algorithm, budget: int, executor, label=None, epsilon=None) -> RunResult:
    config = spec.config(alg, budget)
    if epsilon is not None:
        config = replace(config, epsilon=float(epsilon))
    _, n_end = config.iteration_plan()
    tasks = [(spec.objective, spec.dim, spec.sigma, config, spec.seed, r) for r in range(spec.replications)]
    t0 = time.perf_counter()
    if executor is None:
        outcomes = [_replication(t) for t in tasks]
    else:
        pool, workers = executor
        chunk = max(1, len(tasks) // (4 * workers))
        outcomes = list(pool.map(_replication, tasks, chunksize=chunk))
    wall = time.perf_counter() - t0

    sq_err, f_end, spent = (np.array(col) for col in zip(*outcomes))
    expected = config.expected_measurements()
    if np.any(spent != expected):
        raise RuntimeError(f"{alg.value}@{budget}: spent {set(spent.tolist())} measurements, expected {expected}")
    objective = spec.objective_fn
    x0 = config.x0
    nmse = None
    if objective.x_star is not None:
        nmse = sq_err / float(np.sum((x0 - objective.x_star) ** 2))
    fval = f_end / objective.eval(x0)
    if not np.all(np.isfinite(fval)) or (nmse is not None and not np.all(np.isfinite(nmse))):
        raise NumericalError(f"{label or alg.value}@{budget}: non-finite final iterate or objective value")
    logger.info("%s@%d: %d replications in %.2fs", label or alg.value, budget, spec.replications, wall)
    return RunResult(
        objective=objective.name,
        algorithm=label or alg.value,
        sigma=spec.sigma,
        budget=budget,
        n_end=n_end,
        replications=spec.replications,
        seed=spec.seed,
        nmse=nmse,
        fval=fval,
        measurements=spent,
        wall_clock=wall,
        epsilon=config.epsilon if alg.kind is Kind.ASYM_BERNOULLI else None,
    )


def _executor(parallel: Optional[int]):
    workers = _default_parallel() if parallel is None else int(parallel)
    if workers < 1:
        raise ConfigError(f"parallel: must be at least 1, got {workers}")
    return None if workers == 1 else (ProcessPoolExecutor(max_workers=workers), workers)


def run_experiment(spec: ExperimentSpec, parallel: Optional[int] = None) -> List[RunResult]:
    """Run every (algorithm, budget) cell of ``spec``.

    Parameters
    ----------
    spec : ExperimentSpec
    parallel : int, optional
        Worker processes; defaults to ``$RDSA_PARALLEL`` or 1. Results are
        identical for any worker count.

    Returns
    -------
    list of RunResult
        One entry per cell, algorithms outer, budgets inner.
    """
    executor = _executor(parallel)
    try:
        return [
            _run_cell(spec, Algorithm.parse(alg), budget, executor)
            for alg in spec.algorithms
            for budget in spec.budgets
        ]
    finally:
        if executor is not None:
            executor[0].shutdown()


def sweep_epsilon(spec: ExperimentSpec, epsilons: Sequence[float], parallel: Optional[int] = None) -> List[RunResult]:
    """Run each asymmetric Bernoulli algorithm of ``spec`` once per ``epsilon``.

    Rows are labelled ``"<algorithm>(eps=<value>)"``; an empty grid yields no rows.
    """
    algs = [Algorithm.parse(a) for a in spec.algorithms]
    bad = [a.value for a in algs if a.kind is not Kind.ASYM_BERNOULLI]
    if bad:
        raise ConfigError(f"algorithms: epsilon sweeps need asymmetric Bernoulli variants, got {', '.join(bad)}")
    for eps in epsilons:
        if not (eps > 0 and math.isfinite(eps)):
            raise ConfigError(f"epsilons: values must be positive, got {eps!r}")
    if len(epsilons) == 0:
        return []
    executor = _executor(parallel)
    try:
        return [
            _run_cell(spec, alg, budget, executor, label=f"{alg.value}(eps={float(eps)!r})", epsilon=eps)
            for alg in algs
            for eps in epsilons
            for budget in spec.budgets
        ]
    finally:
        if executor is not None:
            executor[0].shutdown()


# ---------------------------------------------------------------------------
# Output


def _metrics_for(results: Sequence[RunResult], metrics: Sequence[str]) -> List[str]:
    if not results:
        return list(metrics)
    return [m for m in metrics if m != "nmse" or all(r.nmse is not None for r in results)]


def format_csv(results: Sequence[RunResult], metrics: Sequence[str] = ("nmse",)) -> str:
    """CSV with :data:`CSV_COLUMNS`; floats are written with ``repr`` for exact round-trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        for m in _metrics_for([r], metrics):
            writer.writerow([
                r.objective, r.algorithm, repr(float(r.sigma)), r.budget, r.n_end,
                r.replications, m, repr(r.mean(m)), repr(r.stderr(m)), r.seed,
            ])
    return buf.getvalue()


def format_markdown(results: Sequence[RunResult], metrics: Sequence[str] = ("nmse",)) -> str:
    """One table per metric: budgets as rows, algorithms as columns, ``mean ± stderr`` cells."""
    if not results:
        return ""
    algs = list(dict.fromkeys(r.algorithm for r in results))
    budgets = sorted({r.budget for r in results})
    lookup = {(r.algorithm, r.budget): r for r in results}
    r0 = results[0]
    blocks = []
    for m in _metrics_for(results, metrics):
        lines = [
            f"**{m.upper()}** — {r0.objective}, sigma={r0.sigma:g}, {r0.replications} replications, seed {r0.seed}",
            "",
            "| Measurements | " + " | ".join(algs) + " |",
            "|---" * (len(algs) + 1) + "|",
        ]
        for b in budgets:
            cells = []
            for a in algs:
                r = lookup.get((a, b))
                cells.append("—" if r is None else f"{r.mean(m):.2e} ± {r.stderr(m):.2e}")
            lines.append(f"| {b} | " + " | ".join(cells) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def format_jsonl(results: Sequence[RunResult], metrics: Sequence[str] = ("nmse",)) -> str:
    """One JSON object per cell with summary statistics and per-replication values."""
    out = []
    for r in results:
        record = {
            "objective": r.objective,
            "algorithm": r.algorithm,
            "sigma": r.sigma,
            "budget": r.budget,
            "n_end": r.n_end,
            "replications": r.replications,
            "seed": r.seed,
            "epsilon": r.epsilon,
            "measurements": int(r.measurements[0]),
            "wall_clock_s": r.wall_clock,
        }
        for m in _metrics_for([r], metrics):
            record[m] = {"mean": r.mean(m), "stderr": r.stderr(m), "values": r.values(m).tolist()}
        out.append(json.dumps(record))
    return "".join(line + "\n" for line in out)


_FORMATTERS = {"csv": format_csv, "markdown": format_markdown, "md": format_markdown, "jsonl": format_jsonl, "json-lines": format_jsonl}


def emit(results: Sequence[RunResult], fmt: str = "csv", out=None, metrics: Sequence[str] = ("nmse",)) -> str:
    """Render ``results`` and write them to ``out`` (a path, a text stream, or ``None``).

    Returns the rendered text. Files are written UTF-8 with ``\\n`` line endings.
    """
    try:
        formatter = _FORMATTERS[fmt.lower()]
    except KeyError:
        raise ConfigError(f"format: unknown output format {fmt!r} (known: {', '.join(FORMATS)})") from None
    text = formatter(results, metrics)
    if out is None:
        return text
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    return text


# ---------------------------------------------------------------------------
# Config files

_SCHEDULE_KEYS = ("a0", "A", "alpha", "delta0", "gamma")


def _parse_box(text: str):
    if text.strip().lower() in ("none", "off", ""):
        return None
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"box: expected 'lo, hi' or 'none', got {text!r}")
    return tuple(parts)


def _schedule(base: Schedule, section, prefix: str) -> Schedule:
    changes = {}
    for key in _SCHEDULE_KEYS:
        # configparser lower-cases option names, so "A" is looked up as "a".
        opt = f"{prefix}.{key}".lower()
        if opt in section:
            changes[key] = float(section[opt])
    return replace(base, **changes) if changes else base


def spec_from_mapping(section, overrides: Optional[Dict] = None, name: str = "experiment") -> Tuple[ExperimentSpec, List[float]]:
    """Build a spec (and optional sweep grid) from a config section plus overrides.

    ``overrides`` uses :class:`ExperimentSpec` field names and wins over the
    section's values.
    """
    overrides = dict(overrides or {})
    kw: Dict = {"name": name}
    converters = {
        "objective": str, "dim": int, "sigma": float, "replications": int, "seed": int,
        "eta": float, "epsilon": float, "epsilon_first": float, "epsilon_second": float,
        "pd_rule": str, "pd_floor_scale": float, "warm_start_fraction": float,
    }
    known = set(converters) | {
        "algorithms", "budgets", "metrics", "iterate_averaging", "box", "epsilons", "x0",
    } | {f"{p}.{k}".lower() for p in ("first", "second") for k in _SCHEDULE_KEYS}
    unknown = [k for k in section if k not in known]
    if unknown:
        raise ConfigError(f"{name}: unknown config key(s) {', '.join(sorted(unknown))}")
    try:
        for key, conv in converters.items():
            if key in section:
                kw[key] = conv(section[key])
        for key in ("algorithms", "budgets", "metrics"):
            if key in section:
                kw[key] = section[key]
        if "x0" in section:
            kw["x0"] = tuple(float(v) for v in section["x0"].split(","))
        if "iterate_averaging" in section:
            kw["iterate_averaging"] = section["iterate_averaging"].strip().lower() in ("1", "true", "yes", "on")
        if "box" in section:
            kw["box"] = _parse_box(section["box"])
        kw["first_schedule"] = _schedule(FIRST_ORDER_SCHEDULE, section, "first")
        kw["second_schedule"] = _schedule(SECOND_ORDER_SCHEDULE, section, "second")
        grid = [float(v) for v in _as_tuple(section.get("epsilons", ""))]
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    if "epsilons" in overrides:
        grid = list(overrides.pop("epsilons"))
    valid = {f.name for f in fields(ExperimentSpec)}
    for key, value in overrides.items():
        if key not in valid:
            raise ConfigError(f"unknown experiment field {key!r}")
        if value is not None:
            kw[key] = value
    return ExperimentSpec(**kw), grid


def load_config(path, overrides: Optional[Dict] = None) -> List[Tuple[ExperimentSpec, List[float]]]:
    """Parse a config file into ``(spec, epsilon grid)`` pairs, one per section.

    A file with only a ``[DEFAULT]`` section yields a single experiment.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    sections = parser.sections()
    if not sections:
        return [spec_from_mapping(parser.defaults(), overrides, name="default")]
    return [spec_from_mapping(parser[s], overrides, name=s) for s in sections]


def spec_to_dict(spec: ExperimentSpec) -> Dict:
    """Plain-data view of a spec (for logging and JSON)."""
    d = asdict(spec)
    d["first_schedule"] = asdict(spec.first_schedule)
    d["second_schedule"] = asdict(spec.second_schedule)
    return d

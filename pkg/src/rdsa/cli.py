"""Command-line front end: ``rdsa run``, ``rdsa sweep`` and ``rdsa theory``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Dict, List, Optional, Sequence

from . import theory
from .errors import ConfigError, NumericalError
from .harness import emit, load_config, make_objective, run_experiment, spec_from_mapping, sweep_epsilon
from .perturbation import PerturbationDist

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

logger = logging.getLogger("rdsa")


def _csv_list(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> List[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI experiment file; flags override its values")
    p.add_argument("--objective", help="quadratic or fourth_order (default quadratic)")
    p.add_argument("--dim", type=int, help="problem dimension (default 10)")
    p.add_argument("--sigma", type=float, help="noise level (default 0.001)")
    p.add_argument("--algo", type=_csv_list, help="comma-separated algorithms, e.g. 1SPSA,2RDSA-AsymBer")
    p.add_argument("--budget", type=_ints, help="comma-separated measurement budgets (default 2000)")
    p.add_argument("--reps", type=int, help="replications per cell (default 100)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--eta", type=float, help="uniform half-width (default 1)")
    p.add_argument("--epsilon", type=float, help="asymmetric Bernoulli parameter for every algorithm")
    p.add_argument("--metric", type=_csv_list, help="nmse and/or fval (default nmse)")
    p.add_argument("--format", default="csv", choices=("csv", "markdown", "jsonl"))
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--parallel", type=int, help="worker processes (default $RDSA_PARALLEL or 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdsa", description="Random directions stochastic approximation benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replicated NMSE / function-value experiment")
    _add_experiment_args(run)

    sweep = sub.add_parser("sweep", help="asymmetric Bernoulli epsilon sensitivity")
    _add_experiment_args(sweep)
    sweep.add_argument("--grid", type=_floats, help="comma-separated epsilon values")

    th = sub.add_parser("theory", help="asymptotic constants and AMSE ratios")
    th.add_argument("--epsilon", type=float, default=0.01)
    th.add_argument("--eta", type=float, default=1.0)
    th.add_argument("--objective", default=None, help="evaluate AMSE terms at this objective's optimum")
    th.add_argument("--dim", type=int, default=10)
    th.add_argument("--sigma", type=float, default=0.001)
    th.add_argument("--delta0", type=float, default=1.0)
    th.add_argument("--alpha", type=float, default=1.0)
    th.add_argument("--gamma", type=float, default=1.0 / 6.0)
    th.add_argument("--out", help="output file (default stdout)")
    return parser


def _overrides(args) -> Dict:
    mapping = {
        "objective": args.objective, "dim": args.dim, "sigma": args.sigma, "algorithms": args.algo,
        "budgets": args.budget, "replications": args.reps, "seed": args.seed, "eta": args.eta,
        "epsilon": args.epsilon, "metrics": args.metric,
    }
    if getattr(args, "grid", None) is not None:
        mapping["epsilons"] = args.grid
    return {k: v for k, v in mapping.items() if v is not None}


def _experiments(args, defaults: Optional[Dict] = None):
    overrides = _overrides(args)
    if defaults and not args.config:
        overrides = {**defaults, **overrides}
    if args.config:
        return load_config(args.config, overrides)
    return [spec_from_mapping({}, overrides)]


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_run(args) -> int:
    chunks = []
    for spec, _ in _experiments(args):
        results = run_experiment(spec, parallel=args.parallel)
        chunks.append((results, spec.metrics))
    _write(_render(chunks, args.format), args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    chunks = []
    for spec, grid in _experiments(args, {"algorithms": ["1RDSA-AsymBer", "2RDSA-AsymBer"]}):
        results = sweep_epsilon(spec, grid, parallel=args.parallel)
        chunks.append((results, spec.metrics))
    _write(_render(chunks, args.format), args.out)
    return EXIT_OK


def _render(chunks, fmt: str) -> str:
    parts = []
    for i, (results, metrics) in enumerate(chunks):
        text = emit(results, fmt, None, metrics)
        if fmt == "csv" and i > 0:
            text = text.split("\n", 1)[1]  # one header for the whole file
        parts.append(text)
    sep = "\n" if fmt == "markdown" else ""
    return sep.join(parts)


def _cmd_theory(args) -> int:
    unif = PerturbationDist.uniform(args.eta)
    asym = PerturbationDist.asym_bernoulli(args.epsilon)
    spsa = PerturbationDist.sym_bernoulli()
    report = {
        "k_mu": {"uniform": theory.k_mu(unif), "asym_bernoulli": theory.k_mu(asym), "spsa": theory.k_mu(spsa)},
        "fourth_moment_ratio_asym_bernoulli": theory.fourth_moment_ratio(asym),
        "measurement_ratio": dict(zip(("uniform", "asym_bernoulli", "gaussian", "spsa"), theory.measurement_ratio(args.epsilon))),
        "bias_multiplier": {"2RDSA-Unif": theory.bias_multiplier(unif), "2RDSA-AsymBer": theory.bias_multiplier(asym)},
    }
    if args.objective:
        obj = make_objective(args.objective, args.dim)
        x_star = obj.x_star
        inputs = theory.AsymptoticInputs(
            hessian=obj.hessian(x_star), T=theory.third_deriv_T(obj), sigma2=args.sigma**2,
            delta0=args.delta0, alpha=args.alpha, gamma=args.gamma,
        )
        A, B = theory.amse_terms(inputs)
        report["amse"] = {
            "objective": obj.name, "A": A, "B": B,
            "2SPSA": theory.amse_second_order(inputs, spsa),
            "2RDSA-Unif": theory.amse_second_order(inputs, unif),
            "2RDSA-AsymBer": theory.amse_second_order(inputs, asym),
            "1RDSA-Avg": theory.amse_iterate_averaging(inputs),
            "simulation_ratio_vs_2SPSA": {
                "2RDSA-Unif": theory.simulation_ratio_vs_2spsa(unif, A, B),
                "2RDSA-AsymBer": theory.simulation_ratio_vs_2spsa(asym, A, B),
            },
        }
    _write(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "theory": _cmd_theory}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"rdsa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"rdsa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rdsa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

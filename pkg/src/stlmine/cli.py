"""Command-line front end.

Subcommands:

  robustness     evaluate a formula on a trace CSV
  falsify        search a system's condition box for a violating trace
  mine           run the full requirement-mining loop on a template
  bench-ackley   compare acquisition strategies on the Ackley objective
  scaling-sweep  mining cost across observation scaling factors

Options can come from a flat JSON config (--config); explicit flags win.
Output files are byte-reproducible from (config, seed): wall-clock timings
go to stderr, never into files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .acquisition import (
    AcquisitionConfig,
    Domain,
    default_lengthscale,
    optimize,
    regret_bound,
)
from .gp import GaussianKernel, MaternKernel
from .mining import MiningConfig, falsify, mine, validate
from .robustness import robustness
from .signals import read_signal_csv, write_signal_csv
from .stl import free_parameters, instantiate, parse_formula
from .systems import ackley, simulate, transmission_surrogate
from .templates import TEMPLATE_NAMES, template_by_name

__all__ = ["main", "BenchReport", "run_ackley_benchmark", "run_scaling_sweep"]

ACKLEY_BOUNDS = ((-5.0, 5.0), (-5.0, 5.0))
GP_STRATEGIES = ("gp_acb", "gp_ucb", "batch_greedy_ucb", "explore", "exploit")
KERNEL_NAMES = ("gaussian", "matern")
SWEEP_XIS = (0.1, 0.25, 0.5, 0.75, 1.0)


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _trial_seed(master: int, *indices: int) -> int:
    return int(np.random.SeedSequence([master, *indices]).generate_state(1)[0])


def _make_kernel(name: str, lengthscale: float):
    if name == "gaussian":
        return GaussianKernel(lengthscale)
    if name == "matern":
        return MaternKernel(lengthscale, nu=2.5)
    raise ConfigError(f"unknown kernel {name!r}; pick from {KERNEL_NAMES}")


# ---------------------------------------------------------------------------
# Ackley benchmark


@dataclass
class BenchReport:
    """Mean regret curves plus per-trial summaries for one benchmark run."""

    T: int
    trials: int
    mean_regret: dict  # (strategy, kernel) -> array of length T
    trial_rows: list   # dict rows: strategy, kernel, trial, metrics

    def iterations_to_within_5pct(self, strategy: str, kernel: str) -> int:
        """First iteration whose mean regret is within 5% of the final one."""
        curve = self.mean_regret[(strategy, kernel)]
        final = curve[-1]
        hits = np.nonzero(curve <= 1.05 * final + 1e-12)[0]
        return int(hits[0]) + 1

    def final_regrets(self, strategy: str, kernel: str) -> np.ndarray:
        vals = [
            row["final_regret"]
            for row in self.trial_rows
            if row["strategy"] == strategy and row["kernel"] == kernel
        ]
        return np.array(vals)


def _run_ackley_trial(payload: tuple) -> dict:
    (strategy, kernel_name, trial, master_seed, T, n_candidates, delta, xi, noise_var) = payload
    seed = _trial_seed(master_seed, trial)
    domain = Domain.sample(ACKLEY_BOUNDS, n_candidates, seed)
    kernel = _make_kernel(kernel_name, default_lengthscale(domain))
    cfg = AcquisitionConfig(
        strategy=strategy,
        T=T,
        kernel=kernel,
        delta=delta,
        xi=xi,
        noise_var=noise_var,
        mode="minimize",
        n_candidates=n_candidates,
        observation_noise_var=noise_var,
    )
    rng = np.random.default_rng(_trial_seed(master_seed, trial, 1))
    run = optimize(
        lambda p: ackley(p[0], p[1]), domain, cfg, rng=rng, optimum_value=0.0
    )
    solution_regret = np.minimum.accumulate(run.true_values)  # optimum is 0
    cum = float(run.cumulative_regret[-1])
    beta_T = float(run.betas[-1])
    gain = run.information_gain(noise_var)
    if strategy == "gp_acb":
        n_eta = run.eta_max
    elif strategy in ("gp_ucb", "batch_greedy_ucb"):
        n_eta = 1.0
    else:
        n_eta = float("nan")
    if math.isfinite(n_eta) and n_eta > 0:
        bound = regret_bound(run.n_evaluations, beta_T, gain, n_eta, noise_var)
    else:
        bound = float("nan")
    curve = solution_regret.copy()
    final = float(curve[-1])
    own_hits = np.nonzero(curve <= 1.05 * final + 1e-12)[0]
    return {
        "strategy": strategy,
        "kernel": kernel_name,
        "trial": trial,
        "curve": curve,
        "final_regret": final,
        "iters_to_5pct": int(own_hits[0]) + 1,
        "cum_regret": cum,
        "beta_T": beta_T,
        "info_gain": gain,
        "eta_max": n_eta,
        "regret_bound": bound,
        "bound_holds": float(cum <= bound) if math.isfinite(bound) else float("nan"),
    }


def _pool_map(fn, payloads, jobs: int):
    if jobs <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, payloads, chunksize=1))


def run_ackley_benchmark(
    strategies,
    kernels,
    trials: int,
    T: int,
    seed: int,
    n_candidates: int = 1000,
    delta: float = 0.1,
    xi: float = 0.5,
    noise_var: float = 0.025,
    jobs: int = 1,
) -> BenchReport:
    """Independent random-start trials of each strategy/kernel pair.

    Trials are paired across strategies (trial i always sees the same
    candidate discretization and noise stream), which sharpens head-to-head
    comparisons of trial means.
    """
    for s in strategies:
        if s not in GP_STRATEGIES:
            raise ConfigError(
                f"strategy {s!r} is not kernel-based; benchmark supports {GP_STRATEGIES}"
            )
    for k in kernels:
        if k not in KERNEL_NAMES:
            raise ConfigError(f"unknown kernel {k!r}; pick from {KERNEL_NAMES}")
    payloads = [
        (s, k, i, seed, T, n_candidates, delta, xi, noise_var)
        for s in strategies
        for k in kernels
        for i in range(trials)
    ]
    rows = _pool_map(_run_ackley_trial, payloads, jobs)
    rows.sort(key=lambda r: (r["strategy"], r["kernel"], r["trial"]))
    mean_regret = {}
    for s in strategies:
        for k in kernels:
            curves = [r["curve"] for r in rows if r["strategy"] == s and r["kernel"] == k]
            mean_regret[(s, k)] = np.mean(np.vstack(curves), axis=0)
    return BenchReport(T=T, trials=trials, mean_regret=mean_regret, trial_rows=rows)


def _write_bench_csv(report: BenchReport, path: str) -> None:
    lines = ["# stlmine bench-ackley v1", "record,strategy,kernel,trial,iteration,value"]
    for (s, k), curve in sorted(report.mean_regret.items()):
        for t, v in enumerate(curve, start=1):
            lines.append(f"mean_regret,{s},{k},,{t},{_fmt(float(v))}")
        lines.append(f"iters_to_5pct_mean,{s},{k},,,{report.iterations_to_within_5pct(s, k)}")
    per_trial_keys = (
        "final_regret",
        "iters_to_5pct",
        "cum_regret",
        "beta_T",
        "info_gain",
        "eta_max",
        "regret_bound",
        "bound_holds",
    )
    for row in report.trial_rows:
        for key in per_trial_keys:
            lines.append(
                f"{key},{row['strategy']},{row['kernel']},{row['trial']},,{_fmt(row[key])}"
            )
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Mining commands


def _mining_config(opts) -> MiningConfig:
    acq = None
    if opts.strategy is not None or opts.kernel is not None or opts.xi is not None:
        system = transmission_surrogate()
        probe = Domain.sample(system.x0_bounds, 2, seed=0)
        kernel = _make_kernel(opts.kernel or "matern", default_lengthscale(probe))
        acq = AcquisitionConfig(
            strategy=opts.strategy or "gp_acb",
            T=opts.budget,
            kernel=kernel,
            delta=0.1,
            xi=opts.xi if opts.xi is not None else 0.5,
            noise_var=0.025,
            mode="minimize",
        )
    return MiningConfig(
        epsilon=opts.epsilon,
        synthesis_tol=opts.tol,
        falsification_budget=opts.budget,
        max_rounds=opts.max_rounds,
        init_samples=opts.init_samples,
        acquisition=acq,
    )


def _run_mining_trial(payload: tuple) -> dict:
    (template_name, strategy, kernel_name, xi, trial, master_seed,
     epsilon, tol, budget, max_rounds, init_samples) = payload
    system = transmission_surrogate()
    pf = template_by_name(template_name)
    probe = Domain.sample(system.x0_bounds, 2, seed=0)
    kernel = _make_kernel(kernel_name, default_lengthscale(probe))
    acq = AcquisitionConfig(
        strategy=strategy, T=budget, kernel=kernel, delta=0.1, xi=xi,
        noise_var=0.025, mode="minimize",
    )
    cfg = MiningConfig(
        epsilon=epsilon, synthesis_tol=tol, falsification_budget=budget,
        max_rounds=max_rounds, init_samples=init_samples, acquisition=acq,
    )
    result = mine(system, pf, cfg, seed=_trial_seed(master_seed, trial))
    return {
        "template": template_name,
        "strategy": strategy,
        "kernel": kernel_name,
        "xi": xi,
        "trial": trial,
        "status": result.status,
        "simulations": result.total_simulations,
        "rounds": result.rounds,
        "min_robustness": result.min_robustness_on_samples,
        "valuation": dict(sorted(result.valuation.items())),
        "falsification_time": result.falsification_time,
        "synthesis_time": result.synthesis_time,
    }


def run_scaling_sweep(
    template_name: str,
    xis,
    trials: int,
    seed: int,
    epsilon: float = 1.0,
    tol: float = 1e-3,
    budget: int = 200,
    max_rounds: int = 30,
    init_samples: int = 10,
    jobs: int = 1,
) -> list[dict]:
    payloads = [
        (template_name, "gp_acb", "matern", xi, i, seed,
         epsilon, tol, budget, max_rounds, init_samples)
        for xi in xis
        for i in range(trials)
    ]
    rows = _pool_map(_run_mining_trial, payloads, jobs)
    rows.sort(key=lambda r: (r["xi"], r["trial"]))
    return rows


def _write_sweep_csv(rows, xis, path: str) -> None:
    lines = ["# stlmine scaling-sweep v1", "record,xi,trial,value"]
    for row in rows:
        lines.append(f"simulations,{_fmt(row['xi'])},{row['trial']},{row['simulations']}")
        lines.append(f"rounds,{_fmt(row['xi'])},{row['trial']},{row['rounds']}")
        lines.append(
            f"mined,{_fmt(row['xi'])},{row['trial']},{1 if row['status'] == 'mined' else 0}"
        )
    for xi in xis:
        sims = [r["simulations"] for r in rows if r["xi"] == xi]
        lines.append(f"mean_simulations,{_fmt(xi)},,{_fmt(float(np.mean(sims)))}")
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Plumbing


def _write_lines(path: str, lines) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a flat JSON object")
    return cfg


def _apply_config(args: argparse.Namespace, config: dict, known: dict) -> argparse.Namespace:
    """Fill unset options from the config, then fall back to defaults."""
    for key, value in config.items():
        attr = key.replace("-", "_")
        if attr not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)
    for attr, default in known.items():
        if getattr(args, attr, None) is None:
            setattr(args, attr, default)
    return args


def _parse_formula_text(text: str):
    pf = parse_formula(text)
    if free_parameters(pf.root):
        raise ConfigError(
            f"unbound parameter(s) {sorted(free_parameters(pf.root))} in formula"
        )
    return pf.root


# ---------------------------------------------------------------------------
# Commands


def _cmd_robustness(args) -> int:
    config = _load_config(args.config)
    _apply_config(args, config, {"trace": None, "formula": None, "out": None, "t": 0.0})
    if not args.trace or not args.formula:
        raise ConfigError("robustness needs --trace and --formula")
    signal = read_signal_csv(args.trace)
    formula = _parse_formula_text(args.formula)
    value = robustness(signal, formula, float(args.t))
    verdict = "satisfied" if value > 0 else "violated"
    print(f"robustness,{_fmt(value)}")
    print(f"verdict,{verdict}")
    if args.out:
        _write_lines(
            args.out,
            ["# stlmine robustness v1", "key,value", f"robustness,{_fmt(value)}", f"verdict,{verdict}"],
        )
    return 0


def _cmd_falsify(args) -> int:
    config = _load_config(args.config)
    _apply_config(
        args,
        config,
        {
            "formula": None, "seed": 0, "budget": 200, "strategy": "gp_acb",
            "kernel": "matern", "xi": 0.5, "out": None, "trace_out": None,
        },
    )
    if not args.formula:
        raise ConfigError("falsify needs --formula")
    system = transmission_surrogate()
    formula = _parse_formula_text(args.formula)
    if args.strategy not in GP_STRATEGIES + ("nelder_mead",):
        raise ConfigError(f"unknown strategy {args.strategy!r}")
    probe = Domain.sample(system.x0_bounds, 2, seed=0)
    acq = AcquisitionConfig(
        strategy=args.strategy,
        T=int(args.budget),
        kernel=_make_kernel(args.kernel, default_lengthscale(probe)),
        delta=0.1,
        xi=float(args.xi),
        noise_var=0.025,
        mode="minimize",
    )
    t0 = time.perf_counter()
    outcome = falsify(system, formula, acq, int(args.budget), seed=int(args.seed))
    elapsed = time.perf_counter() - t0
    falsified = hasattr(outcome, "robustness")
    rob = outcome.robustness if falsified else outcome.min_robustness
    x0 = outcome.x0 if falsified else outcome.argmin_x0
    lines = [
        "# stlmine falsify v1",
        "key,value",
        f"falsified,{1 if falsified else 0}",
        f"robustness,{_fmt(float(rob))}",
        f"simulations,{outcome.n_simulations}",
    ] + [f"x0.{i},{_fmt(float(v))}" for i, v in enumerate(x0)]
    for line in lines[2:]:
        print(line)
    if args.out:
        _write_lines(args.out, lines)
    if args.trace_out:
        write_signal_csv(outcome.trace if falsified else outcome.argmin_trace, args.trace_out)
    print(f"falsification wall time: {elapsed:.3f}s", file=sys.stderr)
    return 0


def _cmd_mine(args) -> int:
    config = _load_config(args.config)
    _apply_config(
        args,
        config,
        {
            "template": None, "seed": 0, "epsilon": 1.0, "tol": 1e-3,
            "budget": 200, "max_rounds": 30, "init_samples": 10,
            "strategy": None, "kernel": None, "xi": None,
            "out": None, "validate": 0,
        },
    )
    if args.template not in TEMPLATE_NAMES:
        raise ConfigError(f"--template must be one of {TEMPLATE_NAMES}")
    system = transmission_surrogate()
    pf = template_by_name(args.template)
    args.epsilon = float(args.epsilon)
    args.tol = float(args.tol)
    args.budget = int(args.budget)
    args.max_rounds = int(args.max_rounds)
    args.init_samples = int(args.init_samples)
    cfg = _mining_config(args)
    result = mine(system, pf, cfg, seed=int(args.seed))
    lines = [
        "# stlmine mine v1",
        "key,value",
        f"template,{args.template}",
        f"status,{result.status}",
        f"rounds,{result.rounds}",
        f"simulations,{result.total_simulations}",
        f"min_robustness,{_fmt(float(result.min_robustness_on_samples))}",
    ] + [f"param.{k},{_fmt(float(v))}" for k, v in sorted(result.valuation.items())]
    if int(args.validate) > 0 and result.status == "mined":
        formula = instantiate(pf, result.valuation)
        vmin, _ = validate(system, formula, int(args.validate), seed=int(args.seed) + 1)
        lines.append(f"validate_min_robustness,{_fmt(float(vmin))}")
    for line in lines[2:]:
        print(line)
    if args.out:
        _write_lines(args.out, lines)
    print(
        f"falsification: {result.falsification_time:.3f}s  "
        f"synthesis: {result.synthesis_time:.3f}s",
        file=sys.stderr,
    )
    return 0 if result.status == "mined" else 1


def _cmd_bench_ackley(args) -> int:
    config = _load_config(args.config)
    _apply_config(
        args,
        config,
        {
            "trials": 100, "T": 58, "seed": 0, "jobs": 1, "out": None,
            "strategy": None, "kernel": None, "xi": 0.5,
            "candidates": 1000, "delta": 0.1,
        },
    )
    strategies = [args.strategy] if args.strategy else list(GP_STRATEGIES)
    kernels = [args.kernel] if args.kernel else list(KERNEL_NAMES)
    t0 = time.perf_counter()
    report = run_ackley_benchmark(
        strategies,
        kernels,
        trials=int(args.trials),
        T=int(args.T),
        seed=int(args.seed),
        n_candidates=int(args.candidates),
        delta=float(args.delta),
        xi=float(args.xi),
        jobs=int(args.jobs),
    )
    elapsed = time.perf_counter() - t0
    for (s, k), curve in sorted(report.mean_regret.items()):
        print(f"final_mean_regret,{s},{k},{_fmt(float(curve[-1]))}")
    if args.out:
        _write_bench_csv(report, args.out)
    print(f"benchmark wall time: {elapsed:.3f}s", file=sys.stderr)
    return 0


def _cmd_scaling_sweep(args) -> int:
    config = _load_config(args.config)
    _apply_config(
        args,
        config,
        {
            "trials": 50, "seed": 0, "jobs": 1, "out": None,
            "template": "sp_rpm", "xis": None,
            "epsilon": 1.0, "tol": 1e-3, "budget": 200,
            "max_rounds": 30, "init_samples": 10,
        },
    )
    xis = tuple(float(x) for x in args.xis.split(",")) if args.xis else SWEEP_XIS
    if args.template not in TEMPLATE_NAMES:
        raise ConfigError(f"--template must be one of {TEMPLATE_NAMES}")
    t0 = time.perf_counter()
    rows = run_scaling_sweep(
        args.template,
        xis,
        trials=int(args.trials),
        seed=int(args.seed),
        epsilon=float(args.epsilon),
        tol=float(args.tol),
        budget=int(args.budget),
        max_rounds=int(args.max_rounds),
        init_samples=int(args.init_samples),
        jobs=int(args.jobs),
    )
    elapsed = time.perf_counter() - t0
    for xi in xis:
        sims = [r["simulations"] for r in rows if r["xi"] == xi]
        print(f"mean_simulations,{_fmt(xi)},{_fmt(float(np.mean(sims)))}")
    if args.out:
        _write_sweep_csv(rows, xis, args.out)
    print(f"sweep wall time: {elapsed:.3f}s", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stlmine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config; flags win on conflict")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output CSV path")

    p = sub.add_parser("robustness", help="evaluate a formula on a trace CSV")
    common(p)
    p.add_argument("--trace", help="signal CSV (time,ch1,...)")
    p.add_argument("--formula", help="formula text, no free parameters")
    p.add_argument("--t", type=float, help="evaluation time (default 0)")

    p = sub.add_parser("falsify", help="search for a violating trace")
    common(p)
    p.add_argument("--formula")
    p.add_argument("--budget", type=int)
    p.add_argument("--strategy")
    p.add_argument("--kernel")
    p.add_argument("--xi", type=float)
    p.add_argument("--trace-out", dest="trace_out", help="write the worst trace here")

    p = sub.add_parser("mine", help="mine a requirement template")
    common(p)
    p.add_argument("--template", help=f"one of {TEMPLATE_NAMES}")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--budget", type=int, help="simulations per falsification round")
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--init-samples", dest="init_samples", type=int)
    p.add_argument("--strategy")
    p.add_argument("--kernel")
    p.add_argument("--xi", type=float)
    p.add_argument("--validate", type=int, help="fresh samples for post-mining validation")

    p = sub.add_parser("bench-ackley", help="strategy comparison on Ackley")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--strategy", help="restrict to one strategy")
    p.add_argument("--kernel", help="restrict to one kernel")
    p.add_argument("--xi", type=float)
    p.add_argument("--candidates", type=int)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("scaling-sweep", help="mining cost across scaling factors")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--template")
    p.add_argument("--xis", help="comma-separated scaling factors")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--init-samples", dest="init_samples", type=int)

    return parser


_COMMANDS = {
    "robustness": _cmd_robustness,
    "falsify": _cmd_falsify,
    "mine": _cmd_mine,
    "bench-ackley": _cmd_bench_ackley,
    "scaling-sweep": _cmd_scaling_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

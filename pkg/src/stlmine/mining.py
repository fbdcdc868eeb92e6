"""The requirement-mining loop: tighten parameters, then try to break them.

Mining alternates two sub-searches until they agree:

  1. Parameter synthesis: over the traces collected so far, find the
     tightest valuation whose induced formula still holds on every trace
     with margin in (0, epsilon]. Because each parameter moves the margin
     monotonically, a per-coordinate binary search suffices.
  2. Falsification: search the system's condition box for a trace that
     violates the candidate formula (negative margin), using the
     acquisition machinery in minimize mode. A counterexample loosens the
     next synthesis; failing to falsify certifies the candidate on
     everything seen.

The final result must hold on every accumulated trace, and a Monte-Carlo
validation pass over fresh random conditions estimates the universal
claim.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .acquisition import AcquisitionConfig, Domain, default_lengthscale, optimize
from .gp import MaternKernel
from .robustness import robustness
from .signals import Signal
from .stl import ParametricFormula, Valuation, instantiate, horizon
from .systems import SystemUnderTest, simulate

__all__ = [
    "CounterexampleSet",
    "MiningConfig",
    "MiningResult",
    "Counterexample",
    "NotFalsified",
    "SynthesisError",
    "InfeasibleTemplateError",
    "EpsilonNotReachableError",
    "synthesize_parameters",
    "min_robustness_over",
    "falsify",
    "mine",
    "validate",
]


class SynthesisError(ValueError):
    """Parameter synthesis cannot run (missing directions, no traces)."""


class InfeasibleTemplateError(SynthesisError):
    """Even the loosest corner of the parameter box violates some trace."""

    def __init__(self, valuation: Valuation, min_robustness: float):
        super().__init__(
            f"loosest valuation {valuation} already has margin {min_robustness} <= 0"
        )
        self.valuation = valuation
        self.min_robustness = min_robustness


class EpsilonNotReachableError(SynthesisError):
    """The tightest feasible valuation still leaves margin above epsilon."""

    def __init__(self, valuation: Valuation, min_robustness: float, epsilon: float):
        super().__init__(
            f"tightest valuation {valuation} has margin {min_robustness} > epsilon {epsilon}"
        )
        self.valuation = valuation
        self.min_robustness = min_robustness


class CounterexampleSet:
    """Conditions and their traces accumulated across mining rounds.

    Seed samples, counterexamples, and the final worst witness all live
    here; synthesis always tightens against the whole set.
    """

    def __init__(self, x0_bounds=None):
        self.x0_bounds = None if x0_bounds is None else tuple(x0_bounds)
        self.entries: list[tuple[np.ndarray, Signal]] = []

    def add(self, x0, trace: Signal) -> None:
        x0 = np.asarray(x0, dtype=float)
        if self.x0_bounds is not None:
            for v, (lo, hi) in zip(x0, self.x0_bounds):
                if not (lo <= v <= hi):
                    raise ValueError(f"condition {x0} outside box component [{lo}, {hi}]")
        self.entries.append((x0, trace))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def traces(self) -> list[Signal]:
        return [trace for _, trace in self.entries]


@dataclass(frozen=True)
class MiningConfig:
    """Budgets and tolerances for one mining run.

    ``epsilon`` bounds the final margin from above (the mined formula is
    tight to within epsilon). ``synthesis_tol`` is the binary-search
    stopping width as a fraction of each parameter's box width.
    ``acquisition`` configures the falsifier; None selects the adaptive
    confidence bound with a Matern(2.5) kernel sized to the box.
    """

    epsilon: float = 1.0
    synthesis_tol: float = 1e-3
    falsification_budget: int = 200
    max_rounds: int = 30
    init_samples: int = 10
    acquisition: Optional[AcquisitionConfig] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.synthesis_tol > 0:
            raise ValueError(f"synthesis_tol must be positive, got {self.synthesis_tol}")
        if self.falsification_budget < 1:
            raise ValueError("falsification budget must be >= 1")
        if self.init_samples < 1:
            raise ValueError("init_samples must be >= 1")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")


@dataclass(frozen=True)
class Counterexample:
    x0: np.ndarray
    trace: Signal
    robustness: float  # negative
    n_simulations: int


@dataclass(frozen=True)
class NotFalsified:
    min_robustness: float
    argmin_x0: np.ndarray
    argmin_trace: Signal
    n_simulations: int


FalsificationOutcome = Union[Counterexample, NotFalsified]


@dataclass(frozen=True)
class MiningResult:
    valuation: Valuation
    min_robustness_on_samples: float
    total_simulations: int
    falsification_time: float
    synthesis_time: float
    rounds: int
    counterexamples: CounterexampleSet
    status: str  # mined | budget_exhausted | infeasible


def min_robustness_over(traces, formula, t: float = 0.0) -> float:
    """Smallest margin of ``formula`` across an iterable of traces."""
    values = [robustness(trace, formula, t) for trace in traces]
    if not values:
        raise SynthesisError("need at least one trace")
    return min(values)


def _loose_end(spec) -> float:
    # Margins grow toward the loose end: upper for increasing, lower for
    # decreasing parameters.
    return spec.upper if spec.monotonicity == "increasing" else spec.lower


def _tight_end(spec) -> float:
    return spec.lower if spec.monotonicity == "increasing" else spec.upper


def synthesize_parameters(
    pf: ParametricFormula,
    traces: CounterexampleSet,
    epsilon: float,
    tol: float,
    require_epsilon: bool = True,
) -> Valuation:
    """Tightest valuation keeping every trace's margin positive.

    Runs cyclic per-coordinate binary search in each parameter's declared
    monotone direction until no coordinate moves by more than ``tol``
    (relative to its box width). The returned value sits half a tolerance
    step inside the feasible side of the flip boundary, so the margin is
    strictly positive rather than grazing zero.

    Raises InfeasibleTemplateError when even the loosest corner violates a
    trace, and (unless ``require_epsilon`` is False) EpsilonNotReachableError
    when the tightest feasible margin still exceeds epsilon.
    """
    if len(traces) == 0:
        raise SynthesisError("need at least one trace")
    specs = pf.params
    for spec in specs:
        if spec.monotonicity is None:
            raise SynthesisError(f"parameter {spec.name} has no monotonicity declaration")

    trace_list = list(traces.traces if isinstance(traces, CounterexampleSet) else traces)

    def margin(theta: Valuation) -> float:
        return min_robustness_over(trace_list, instantiate(pf, theta))

    theta = {spec.name: _loose_end(spec) for spec in specs}
    loosest_margin = margin(theta)
    if loosest_margin <= 0.0:
        raise InfeasibleTemplateError(dict(theta), loosest_margin)

    for _ in range(16):  # cycles; independent parameters settle in one
        biggest_move = 0.0
        for spec in specs:
            width = spec.upper - spec.lower
            tol_abs = tol * width
            tight = _tight_end(spec)
            current = theta[spec.name]
            if abs(current - tight) <= tol_abs:
                continue
            probe = dict(theta)
            probe[spec.name] = tight
            if margin(probe) > 0.0:
                new = tight  # pinned at the box edge; cannot tighten further
            else:
                feasible, infeasible = current, tight
                while abs(feasible - infeasible) > tol_abs:
                    mid = 0.5 * (feasible + infeasible)
                    probe[spec.name] = mid
                    if margin(probe) > 0.0:
                        feasible = mid
                    else:
                        infeasible = mid
                back_off = 0.5 * tol_abs if _loose_end(spec) > tight else -0.5 * tol_abs
                new = feasible + back_off
                # never looser than where this pass started
                new = min(new, current) if _loose_end(spec) > tight else max(new, current)
            biggest_move = max(biggest_move, abs(new - theta[spec.name]) / width)
            theta[spec.name] = new
        if biggest_move <= tol:
            break

    final_margin = margin(theta)
    if final_margin <= 0.0:  # cannot happen for truly monotone templates
        raise SynthesisError(
            f"synthesis landed on a non-positive margin {final_margin}; "
            "a declared monotonicity direction is probably wrong"
        )
    if require_epsilon and final_margin > epsilon:
        raise EpsilonNotReachableError(dict(theta), final_margin, epsilon)
    return theta


def _default_acquisition(system: SystemUnderTest, budget: int) -> AcquisitionConfig:
    domain_probe = Domain.sample(system.x0_bounds, 2, seed=0)
    return AcquisitionConfig(
        strategy="gp_acb",
        T=budget,
        kernel=MaternKernel(default_lengthscale(domain_probe), nu=2.5),
        delta=0.1,
        xi=0.5,
        noise_var=0.025,
        mode="minimize",
    )


def falsify(
    system: SystemUnderTest,
    formula,
    cfg: Optional[AcquisitionConfig],
    budget: int,
    seed: int = 0,
) -> FalsificationOutcome:
    """Search the condition box for a trace violating ``formula``.

    Minimizes the margin of the simulated trace over a fresh candidate
    discretization (random points plus the box vertices) and stops at the
    first negative observation. When the budget allows, its tail is
    reserved for a deterministic sweep of the box vertices, run only if
    the strategy search found nothing: extreme responses of this kind of
    plant sit on the boundary, so the sweep makes a "not falsified"
    verdict mean the same thing for every strategy. At most ``budget``
    simulations run.
    """
    if horizon(formula) > system.sim_horizon:
        raise ValueError(
            f"formula horizon {horizon(formula)} exceeds simulation window "
            f"{system.sim_horizon}"
        )
    if cfg is None:
        cfg = _default_acquisition(system, budget)
    d = len(system.x0_bounds)
    corners = [
        np.array([b[bit] for b, bit in zip(system.x0_bounds, idx)])
        for idx in np.ndindex(*(2,) * d)
    ]
    sweep = corners if budget > len(corners) + 8 else []
    cfg = replace(cfg, T=budget - len(sweep), mode="minimize")
    domain = Domain.sample(
        system.x0_bounds, cfg.n_candidates, seed=seed, include_vertices=True
    )

    state: dict = {"last": None, "best": None}

    def objective(x0: np.ndarray) -> float:
        trace = simulate(system, x0)
        r = robustness(trace, formula, 0.0)
        state["last"] = (np.array(x0), trace, r)
        if state["best"] is None or r < state["best"][2]:
            state["best"] = state["last"]
        return r

    run = optimize(
        objective,
        domain,
        cfg,
        rng=np.random.default_rng(seed),
        stop_condition=lambda y: y < 0.0,
    )
    n_sims = run.n_evaluations
    if run.stopped_early and state["last"][2] < 0.0:
        x0, trace, r = state["last"]
        return Counterexample(x0, trace, r, n_sims)
    for corner in sweep:
        r = objective(corner)
        n_sims += 1
        if r < 0.0:
            x0, trace, r = state["last"]
            return Counterexample(x0, trace, r, n_sims)
    x0, trace, r = state["best"]
    return NotFalsified(r, x0, trace, n_sims)


def mine(
    system: SystemUnderTest,
    pf: ParametricFormula,
    cfg: MiningConfig,
    seed: int = 0,
) -> MiningResult:
    """Alternate synthesis and falsification until the formula survives.

    Seeds the trace set with ``init_samples`` uniform random conditions,
    then loops: synthesize the tightest valuation on the set; try to
    falsify it. Counterexamples loosen the next synthesis round. When a
    round cannot falsify, its worst observed trace joins the set (making
    the reported margin reflect the worst known behavior) and the result
    is mined once the margin fits in (0, epsilon].
    """
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in system.x0_bounds])
    hi = np.array([b[1] for b in system.x0_bounds])
    ces = CounterexampleSet(system.x0_bounds)
    for _ in range(cfg.init_samples):
        x0 = rng.uniform(lo, hi)
        ces.add(x0, simulate(system, x0))
    total_sims = cfg.init_samples
    synthesis_time = 0.0
    falsification_time = 0.0
    rounds = 0
    theta: Valuation = {}
    margin = float("nan")

    while True:
        t_start = time.perf_counter()
        try:
            theta = synthesize_parameters(
                pf, ces, cfg.epsilon, cfg.synthesis_tol, require_epsilon=False
            )
        except InfeasibleTemplateError as exc:
            synthesis_time += time.perf_counter() - t_start
            return MiningResult(
                exc.valuation, exc.min_robustness, total_sims,
                falsification_time, synthesis_time, rounds, ces, "infeasible",
            )
        candidate = instantiate(pf, theta)
        margin = min_robustness_over(ces.traces, candidate)
        synthesis_time += time.perf_counter() - t_start

        if rounds >= cfg.max_rounds:
            return MiningResult(
                theta, margin, total_sims, falsification_time, synthesis_time,
                rounds, ces, "budget_exhausted",
            )

        t_start = time.perf_counter()
        outcome = falsify(
            system, candidate, cfg.acquisition, cfg.falsification_budget,
            seed=int(rng.integers(2**31)),
        )
        falsification_time += time.perf_counter() - t_start
        total_sims += outcome.n_simulations
        rounds += 1

        if isinstance(outcome, Counterexample):
            ces.add(outcome.x0, outcome.trace)
            continue

        ces.add(outcome.argmin_x0, outcome.argmin_trace)
        margin = min(margin, outcome.min_robustness)
        if 0.0 < margin <= cfg.epsilon:
            return MiningResult(
                theta, margin, total_sims, falsification_time, synthesis_time,
                rounds, ces, "mined",
            )
        # margin still above epsilon (or exactly on the boundary): the new
        # worst trace feeds the next synthesis round.


def validate(
    system: SystemUnderTest, formula, n_samples: int, seed: int = 0
) -> tuple[float, np.ndarray]:
    """Monte-Carlo check of the universal claim on fresh random conditions.

    Returns the minimum margin over ``n_samples`` uniform draws and the
    condition that attains it.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in system.x0_bounds])
    hi = np.array([b[1] for b in system.x0_bounds])
    best_r = float("inf")
    best_x0 = None
    for _ in range(n_samples):
        x0 = rng.uniform(lo, hi)
        r = robustness(simulate(system, x0), formula, 0.0)
        if r < best_r:
            best_r = r
            best_x0 = x0
    return best_r, best_x0

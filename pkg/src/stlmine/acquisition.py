"""Candidate-selection strategies over a discretized search box.

The sequential optimizer keeps a GP posterior over scaled observations and
at each round scores a fixed candidate set:

    ucb(x)      = m(x) + sqrt(beta_t) * sigma(x)
    adaptive(x) = m(x) + sqrt(eta(x) * beta_t) * sigma(x)

where eta min-max normalizes the posterior mean over the candidates, so
the exploration bonus is damped where the surrogate already expects poor
outcomes. Pure exploration (max sigma), pure exploitation (max mean), a
greedy batch variant with hallucinated variance updates, and a derivative-
free Nelder-Mead baseline share the same driver so runs are directly
comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .gp import GaussianKernel, GpPosterior, Kernel, information_gain

__all__ = [
    "Domain",
    "AcquisitionConfig",
    "RunTrace",
    "STRATEGIES",
    "beta_schedule",
    "eta_normalize",
    "score_candidates",
    "select_next",
    "select_next_index",
    "select_batch",
    "optimize",
    "regret_bound",
    "nelder_mead",
    "ObjectiveError",
]

STRATEGIES = (
    "gp_acb",
    "gp_ucb",
    "batch_greedy_ucb",
    "explore",
    "exploit",
    "nelder_mead",
)


class ObjectiveError(RuntimeError):
    """Oracle failure; carries the partial run trace in ``partial_trace``."""

    def __init__(self, message: str, partial_trace: "RunTrace"):
        super().__init__(message)
        self.partial_trace = partial_trace


@dataclass(frozen=True)
class Domain:
    """A box with a fixed, finite candidate discretization.

    bounds is a tuple of (lo, hi) pairs; candidates is an (m, d) array of
    points inside the box, sampled once per run and never resampled.
    """

    bounds: tuple[tuple[float, float], ...]
    candidates: np.ndarray
    seed: int = 0

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"degenerate box side [{lo}, {hi}]")
        cand = np.asarray(self.candidates, dtype=float)
        if cand.ndim != 2 or cand.shape[1] != len(bounds):
            raise ValueError(f"candidates must be (m, {len(bounds)}), got {cand.shape}")
        if cand.shape[0] < 2:
            raise ValueError("need at least 2 candidates")
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        if np.any(cand < lo - 1e-12) or np.any(cand > hi + 1e-12):
            raise ValueError("candidates must lie inside the box")
        cand = cand.copy()
        cand.flags.writeable = False
        object.__setattr__(self, "candidates", cand)

    @classmethod
    def sample(
        cls,
        bounds,
        n_candidates: int,
        seed: int,
        include_vertices: bool = False,
    ) -> "Domain":
        """Uniformly discretize the box into ``n_candidates`` points.

        With ``include_vertices`` the 2^d box corners are appended after
        the random points; extreme responses of monotone systems live at
        vertices, so falsification domains include them as deterministic
        probes.
        """
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        d = len(bounds)
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        pts = rng.uniform(lo, hi, size=(n_candidates, d))
        if include_vertices:
            corners = np.array(
                [[b[bit] for b, bit in zip(bounds, idx)] for idx in np.ndindex(*(2,) * d)]
            )
            pts = np.vstack([pts, corners])
        return cls(bounds, pts, seed)

    @property
    def size(self) -> int:
        return self.candidates.shape[0]

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def diameter(self) -> float:
        spans = np.array([hi - lo for lo, hi in self.bounds])
        return float(np.sqrt(np.sum(spans * spans)))

    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower(), self.upper())


def default_lengthscale(domain: Domain) -> float:
    """Default kernel lengthscale: one tenth of the box diameter."""
    return domain.diameter / 10.0


@dataclass(frozen=True)
class AcquisitionConfig:
    """Strategy and hyperparameters for one optimization run.

    mode "minimize" negates posterior means before scoring (and flips the
    exploitation rule), so the confidence-bound machinery itself always
    maximizes. ``xi`` rescales observations on their way into the GP;
    recorded values and regrets stay unscaled. ``sampling_dt`` is carried
    for simulated systems with a sampled-time reading of the run; the
    optimizer itself never uses it.
    """

    strategy: str
    T: int
    kernel: Kernel
    delta: float = 0.1
    xi: float = 1.0
    noise_var: float = 0.025
    batch_size: int = 5
    mode: str = "maximize"
    n_candidates: int = 1000
    observation_noise_var: float = 0.0
    finite_domain_beta: bool = True
    sampling_dt: Optional[float] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; pick from {STRATEGIES}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0,1), got {self.delta}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.T < 1:
            raise ValueError(f"iteration budget must be >= 1, got {self.T}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.mode not in ("maximize", "minimize"):
            raise ValueError(f"mode must be maximize/minimize, got {self.mode!r}")
        if not self.noise_var > 0:
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")
        if self.observation_noise_var < 0:
            raise ValueError("observation_noise_var must be >= 0")


@dataclass
class RunTrace:
    """Per-iteration record of one optimization run.

    Arrays are aligned by iteration (may be shorter than the budget when a
    stop condition fires). ``observed`` holds unscaled, possibly noisy
    oracle values; ``true_values`` the noiseless ones. Surrogate columns
    (means/sigmas/betas/etas) are NaN for the Nelder-Mead strategy.
    """

    mode: str
    points: np.ndarray
    observed: np.ndarray
    true_values: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    betas: np.ndarray
    etas: np.ndarray
    best_so_far: np.ndarray
    instant_regret: Optional[np.ndarray] = None
    cumulative_regret: Optional[np.ndarray] = None
    stopped_early: bool = False

    @property
    def n_evaluations(self) -> int:
        return self.observed.shape[0]

    @property
    def best_index(self) -> int:
        if self.mode == "minimize":
            return int(np.argmin(self.observed))
        return int(np.argmax(self.observed))

    @property
    def best_point(self) -> np.ndarray:
        return self.points[self.best_index]

    @property
    def best_value(self) -> float:
        return float(self.observed[self.best_index])

    @property
    def eta_min(self) -> float:
        vals = self.etas[~np.isnan(self.etas)]
        return float(vals.min()) if vals.size else float("nan")

    @property
    def eta_max(self) -> float:
        vals = self.etas[~np.isnan(self.etas)]
        return float(vals.max()) if vals.size else float("nan")

    def information_gain(self, noise_var: float) -> float:
        vals = self.sigmas[~np.isnan(self.sigmas)]
        return information_gain(vals * vals, noise_var)


def beta_schedule(t: int, domain_size: int, delta: float, finite_domain: bool = True) -> float:
    """Confidence-width schedule beta_t = 2 ln(|D| pi^2 t^2 / (6 delta)).

    Non-decreasing in t. With ``finite_domain`` False the |D| factor is
    dropped (the continuum variant), which only shifts the schedule by a
    constant.
    """
    if t < 1:
        raise ValueError(f"iteration must be >= 1, got {t}")
    if domain_size < 1:
        raise ValueError(f"domain size must be >= 1, got {domain_size}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0,1), got {delta}")
    pi_t = math.pi * math.pi * t * t / 6.0
    size = float(domain_size) if finite_domain else 1.0
    return 2.0 * math.log(size * pi_t / delta)


def eta_normalize(means) -> np.ndarray:
    """Min-max normalization of posterior means onto [0, 1].

    Constant means (the degenerate case, e.g. at t=1 under a zero-mean
    prior) map to all ones so the adaptive bound falls back to the plain
    confidence bound.
    """
    m = np.asarray(means, dtype=float)
    if m.size == 0:
        raise ValueError("means must be non-empty")
    lo, hi = float(m.min()), float(m.max())
    if hi <= lo:
        return np.ones_like(m)
    return (m - lo) / (hi - lo)


def score_candidates(
    means: np.ndarray,
    sigmas: np.ndarray,
    strategy: str,
    beta: float,
    mode: str = "maximize",
    eta_values: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Acquisition scores for every candidate; argmax is the next query."""
    m = np.asarray(means, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if mode == "minimize":
        m = -m
    if strategy == "explore":
        return s.copy()
    if strategy == "exploit":
        return m.copy()
    if strategy in ("gp_ucb", "batch_greedy_ucb"):
        return m + math.sqrt(beta) * s
    if strategy == "gp_acb":
        eta = eta_normalize(m) if eta_values is None else np.asarray(eta_values, dtype=float)
        return m + np.sqrt(eta * beta) * s
    raise ValueError(f"no candidate scoring for strategy {strategy!r}")


def _posterior_over(gp: GpPosterior, domain: Domain):
    means, variances = gp.predict_many(domain.candidates)
    return means, np.sqrt(variances)


def select_next_index(
    gp: GpPosterior,
    domain: Domain,
    cfg: AcquisitionConfig,
    t: int,
    eta_values: Optional[np.ndarray] = None,
) -> int:
    """Index of the candidate the strategy queries at iteration t.

    Ties break toward the lowest index (np.argmax), keeping runs
    deterministic. ``eta_values`` overrides the adaptive factor, which is
    how the reduction to the plain confidence bound is exercised.
    """
    if domain.size < 2:
        raise ValueError("empty or degenerate candidate list")
    if cfg.strategy == "nelder_mead":
        raise ValueError("nelder_mead does not score candidates; use optimize()")
    if cfg.strategy == "batch_greedy_ucb":
        return _greedy_batch_indices(gp, domain, cfg, t)[0]
    means, sigmas = _posterior_over(gp, domain)
    beta = beta_schedule(t, domain.size, cfg.delta, cfg.finite_domain_beta)
    scores = score_candidates(means, sigmas, cfg.strategy, beta, cfg.mode, eta_values)
    return int(np.argmax(scores))


def select_next(
    gp: GpPosterior,
    domain: Domain,
    cfg: AcquisitionConfig,
    t: int,
    eta_values: Optional[np.ndarray] = None,
) -> np.ndarray:
    """The candidate point the strategy queries at iteration t."""
    return domain.candidates[select_next_index(gp, domain, cfg, t, eta_values)]


def _greedy_batch_indices(
    gp: GpPosterior, domain: Domain, cfg: AcquisitionConfig, t: int
) -> list[int]:
    """Greedy confidence-bound batch with hallucinated variance shrinkage.

    The first element is the plain confidence-bound pick; each later
    element is chosen after updating a copy of the posterior with the
    current mean as a fantasy observation at the previous pick, which
    leaves the mean surface unchanged and shrinks variance there. beta is
    frozen at the batch-opening iteration.
    """
    beta = beta_schedule(t, domain.size, cfg.delta, cfg.finite_domain_beta)
    fantasy = gp
    picks: list[int] = []
    for _ in range(cfg.batch_size):
        means, sigmas = _posterior_over(fantasy, domain)
        scores = score_candidates(means, sigmas, "gp_ucb", beta, cfg.mode)
        idx = int(np.argmax(scores))
        picks.append(idx)
        fantasy = fantasy.update(domain.candidates[idx], float(means[idx]))
    return picks


def select_batch(gp: GpPosterior, domain: Domain, cfg: AcquisitionConfig, t: int) -> np.ndarray:
    """The B points a greedy batch opens at iteration t (rows in order)."""
    return domain.candidates[_greedy_batch_indices(gp, domain, cfg, t)]


def optimize(
    objective: Callable[[np.ndarray], float],
    domain: Domain,
    cfg: AcquisitionConfig,
    rng: Optional[np.random.Generator] = None,
    optimum_value: Optional[float] = None,
    stop_condition: Optional[Callable[[float], bool]] = None,
) -> RunTrace:
    """Run cfg.T rounds of select / observe / condition and record them.

    Observations are scaled by cfg.xi before entering the GP; the trace
    records unscaled values. If cfg.observation_noise_var > 0, Gaussian
    noise is added to what the oracle returns (rng defaults to a generator
    seeded from the domain seed, keeping runs reproducible). When
    ``optimum_value`` is known, instantaneous and cumulative regrets are
    filled in. ``stop_condition`` is checked on each unscaled observation
    and ends the run early. Oracle exceptions are re-raised as
    ObjectiveError with the partial trace attached.
    """
    if rng is None:
        rng = np.random.default_rng(domain.seed)
    noise_std = math.sqrt(cfg.observation_noise_var) if cfg.observation_noise_var else 0.0

    points, observed, true_vals = [], [], []
    means_r, sigmas_r, betas_r, etas_r = [], [], [], []
    stopped = False

    def record_failure(exc: Exception):
        trace = _build_trace(
            cfg, points, observed, true_vals, means_r, sigmas_r, betas_r, etas_r,
            optimum_value, stopped_early=False,
        )
        raise ObjectiveError(f"objective failed at evaluation {len(points) + 1}: {exc}", trace)

    if cfg.strategy == "nelder_mead":
        return _optimize_nelder_mead(objective, domain, cfg, rng, optimum_value, stop_condition)

    gp = GpPosterior.empty(cfg.kernel, cfg.noise_var)
    pending: list[int] = []
    for t in range(1, cfg.T + 1):
        means, sigmas = _posterior_over(gp, domain)
        beta = beta_schedule(t, domain.size, cfg.delta, cfg.finite_domain_beta)
        if cfg.strategy == "batch_greedy_ucb":
            if not pending:
                pending = _greedy_batch_indices(gp, domain, cfg, t)
            idx = pending.pop(0)
            eta_at = float("nan")
        else:
            scores = score_candidates(means, sigmas, cfg.strategy, beta, cfg.mode)
            idx = int(np.argmax(scores))
            score_means = -means if cfg.mode == "minimize" else means
            eta_at = float(eta_normalize(score_means)[idx])
        x = domain.candidates[idx]
        try:
            y_true = float(objective(x))
        except Exception as exc:  # noqa: BLE001 - propagate with partial trace
            record_failure(exc)
        y_obs = y_true + (noise_std * rng.standard_normal() if noise_std else 0.0)

        points.append(x)
        observed.append(y_obs)
        true_vals.append(y_true)
        means_r.append(float(means[idx]))
        sigmas_r.append(float(sigmas[idx]))
        betas_r.append(beta)
        etas_r.append(eta_at)

        gp = gp.update(x, cfg.xi * y_obs)
        if stop_condition is not None and stop_condition(y_obs):
            stopped = True
            break

    return _build_trace(
        cfg, points, observed, true_vals, means_r, sigmas_r, betas_r, etas_r,
        optimum_value, stopped_early=stopped,
    )


def _optimize_nelder_mead(objective, domain, cfg, rng, optimum_value, stop_condition):
    """Nelder-Mead under the same budget/recording contract.

    Restarts from fresh random points until the evaluation budget is
    spent, so flat regions cannot stall the whole run.
    """
    points, observed = [], []
    stopped = False

    class _Stop(Exception):
        pass

    def counted(x):
        y = float(objective(np.asarray(x, dtype=float)))
        points.append(np.asarray(x, dtype=float))
        observed.append(y)
        if stop_condition is not None and stop_condition(y):
            raise _Stop
        if len(points) >= cfg.T:
            raise _Stop
        return y

    try:
        first = True
        while len(points) < cfg.T:
            start = domain.lower() + rng.uniform(size=domain.dim) * (
                domain.upper() - domain.lower()
            )
            if first:
                # Deterministic midpoint start makes single-restart runs easy
                # to reason about; later restarts randomize.
                start = 0.5 * (domain.lower() + domain.upper())
                first = False
            budget_left = cfg.T - len(points)
            nelder_mead(
                counted if cfg.mode == "minimize" else (lambda x: -counted(x)),
                start,
                domain,
                budget_left,
            )
    except _Stop:
        stopped = stop_condition is not None and stop_condition(observed[-1])

    n = len(points)
    nan = [float("nan")] * n
    return _build_trace(
        cfg, points, observed, list(observed), nan, nan, nan, nan,
        optimum_value, stopped_early=stopped,
    )


def _build_trace(
    cfg, points, observed, true_vals, means, sigmas, betas, etas, optimum_value, stopped_early
) -> RunTrace:
    pts = np.array(points, dtype=float) if points else np.empty((0, 0))
    obs = np.asarray(observed, dtype=float)
    tv = np.asarray(true_vals, dtype=float)
    if cfg.mode == "minimize":
        best = np.minimum.accumulate(obs) if obs.size else obs.copy()
    else:
        best = np.maximum.accumulate(obs) if obs.size else obs.copy()
    inst = cum = None
    if optimum_value is not None and obs.size:
        if cfg.mode == "minimize":
            inst = tv - optimum_value
        else:
            inst = optimum_value - tv
        cum = np.cumsum(inst)
    return RunTrace(
        mode=cfg.mode,
        points=pts,
        observed=obs,
        true_values=tv,
        means=np.asarray(means, dtype=float),
        sigmas=np.asarray(sigmas, dtype=float),
        betas=np.asarray(betas, dtype=float),
        etas=np.asarray(etas, dtype=float),
        best_so_far=best,
        instant_regret=inst,
        cumulative_regret=cum,
        stopped_early=stopped_early,
    )


def regret_bound(T: int, beta_T: float, gamma_T: float, n: float, noise_var: float) -> float:
    """High-probability cumulative-regret bound sqrt(n C1 T beta_T gamma_T).

    C1 = 8 / ln(1 + 1/noise_var). ``n`` is the largest adaptive factor the
    run realized (n = 1 recovers the plain confidence-bound value).
    """
    if min(T, beta_T, noise_var) <= 0 or gamma_T < 0:
        raise ValueError("T, beta_T, noise_var must be positive and gamma_T >= 0")
    if not 0.0 < n <= 1.0:
        raise ValueError(f"n must be in (0, 1], got {n}")
    c1 = 8.0 / math.log(1.0 + 1.0 / noise_var)
    return math.sqrt(n * c1 * T * beta_T * gamma_T)


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    start,
    domain: Domain,
    budget: int,
) -> tuple[np.ndarray, float, int]:
    """Minimize with a Nelder-Mead simplex projected onto the box.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    Stops when the evaluation budget is spent, the simplex diameter drops
    below 1e-6, or the simplex values are numerically flat. Returns
    (best point, best value, evaluations used).
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    x0 = domain.clip(np.asarray(start, dtype=float))
    d = domain.dim
    evals = 0
    best_x, best_f = x0.copy(), float("inf")

    def f(x):
        nonlocal evals, best_x, best_f
        evals += 1
        y = float(objective(x))
        if y < best_f:
            best_f = y
            best_x = np.array(x, dtype=float)
        return y

    f0 = f(x0)
    if evals >= budget:
        return best_x, best_f, evals

    # Initial simplex: step along each axis, flipped when it would leave the box.
    simplex = [x0.copy()]
    values = [f0]
    spans = domain.upper() - domain.lower()
    for k in range(d):
        step = 0.25 * spans[k]
        x = x0.copy()
        if x[k] + step > domain.upper()[k]:
            step = -step
        x[k] = np.clip(x[k] + step, domain.lower()[k], domain.upper()[k])
        simplex.append(x)
        values.append(f(x))
        if evals >= budget:
            break

    simplex = np.array(simplex)
    values = np.array(values)

    while evals < budget and len(simplex) == d + 1:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diam = float(np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)))
        if diam < 1e-6 or values[-1] - values[0] < 1e-9:
            break
        centroid = simplex[:-1].mean(axis=0)

        def probe(coef):
            return domain.clip(centroid + coef * (centroid - simplex[-1]))

        xr = probe(1.0)
        fr = f(xr)
        if fr < values[0]:
            if evals < budget:
                xe = probe(2.0)
                fe = f(xe)
                simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
            else:
                simplex[-1], values[-1] = xr, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if evals >= budget:
                break
            xc = probe(0.5) if fr < values[-1] else domain.clip(
                centroid + 0.5 * (simplex[-1] - centroid)
            )
            fc = f(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, d + 1):  # shrink toward the best vertex
                    if evals >= budget:
                        break
                    simplex[i] = domain.clip(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    values[i] = f(simplex[i])

    return best_x, best_f, evals

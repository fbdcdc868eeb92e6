"""Quantitative satisfaction margins for formulas over sampled signals.

The margin (robustness degree) of a formula on a trace is the recursive
min/max combination of predicate slacks:

    r(ch < c,  t) = c - s_ch(t)         r(ch >= c, t) = s_ch(t) - c
    r(!p, t)      = -r(p, t)
    r(p && q, t)  = min(r(p,t), r(q,t))  r(p || q, t) = max(...)
    r(G[a,b) p, t) = min over grid t' in [t+a, t+b) of r(p, t')
    r(F[a,b) p, t) = max over the same window

A positive margin means the trace satisfies the formula and can absorb
channel perturbations up to that size without flipping the verdict; a
negative margin means it violates it with the same interpretation. Windows
are half-open and range over the grid samples they contain; a window that
contains no grid point, or extends past the trace, is an error rather
than a silent truncation.

Evaluation is array-based: each subformula is evaluated at every grid
index in one vectorized pass (O(n) sliding min/max for the temporal
operators), which keeps long traces cheap.
"""

from __future__ import annotations

import math

import numpy as np

from .signals import Signal, SignalError, OffGridError
from .stl import (
    And,
    Finally,
    Formula,
    FormulaError,
    Globally,
    Not,
    Or,
    ParamRef,
    Predicate,
    horizon,
)

__all__ = [
    "robustness",
    "satisfies",
    "EvaluationError",
    "TraceTooShortError",
]

# Window-endpoint snapping tolerance, in fractions of dt (matches signals.GRID_TOL).
_TOL = 1e-6


class EvaluationError(ValueError):
    """The formula cannot be evaluated on this signal."""


class TraceTooShortError(EvaluationError):
    """The trace does not cover all grid points a temporal window needs."""


def window_offsets(a: float, b: float, dt: float) -> tuple[int, int]:
    """Grid-index offsets [lo, hi) covered by the half-open window [a, b).

    Endpoint arithmetic snaps to the grid with a small tolerance so that
    windows specified as exact multiples of dt include/exclude the
    intended samples despite float noise.
    """
    lo = math.ceil(a / dt - _TOL)
    hi = math.ceil(b / dt - _TOL)
    if hi <= lo:
        raise TraceTooShortError(
            f"window [{a}, {b}) contains no grid point at dt={dt}"
        )
    return lo, hi


def sliding_min(x: np.ndarray, w: int) -> np.ndarray:
    """out[i] = min(x[i:i+w]) for i in 0..len(x)-w, in O(n).

    Van Herk striping: block-wise forward and backward running minima,
    combined across the two blocks every window straddles.
    """
    n = x.shape[0]
    if w == 1:
        return x.copy()
    m = n - w + 1
    pad = (-n) % w
    xp = np.concatenate([x, np.full(pad, np.inf)]) if pad else x
    blocks = xp.reshape(-1, w)
    head = np.minimum.accumulate(blocks, axis=1).ravel()  # block-start .. i
    tail = np.minimum.accumulate(blocks[:, ::-1], axis=1)[:, ::-1].ravel()  # i .. block-end
    return np.minimum(tail[:m], head[w - 1 : w - 1 + m])


def sliding_max(x: np.ndarray, w: int) -> np.ndarray:
    return -sliding_min(-x, w)


def _require_concrete(node: Formula):
    if isinstance(node, Predicate):
        if isinstance(node.threshold, ParamRef):
            raise EvaluationError(f"unbound parameter ${node.threshold.name}")
    elif isinstance(node, Not):
        _require_concrete(node.child)
    elif isinstance(node, (And, Or)):
        _require_concrete(node.left)
        _require_concrete(node.right)
    elif isinstance(node, (Finally, Globally)):
        for end in (node.a, node.b):
            if isinstance(end, ParamRef):
                raise EvaluationError(f"unbound parameter ${end.name}")
        _require_concrete(node.child)
    else:
        raise FormulaError(f"not a formula node: {node!r}")


def _eval(node: Formula, signal: Signal) -> np.ndarray:
    """Margins of ``node`` at grid indices 0..k-1, k = returned length.

    The returned prefix is exactly the set of start indices whose nested
    windows fit inside the trace.
    """
    if isinstance(node, Predicate):
        col = signal.channel(node.channel)
        if node.op == "<":
            return node.threshold - col
        return col - node.threshold
    if isinstance(node, Not):
        return -_eval(node.child, signal)
    if isinstance(node, (And, Or)):
        left = _eval(node.left, signal)
        right = _eval(node.right, signal)
        k = min(left.shape[0], right.shape[0])
        op = np.minimum if isinstance(node, And) else np.maximum
        return op(left[:k], right[:k])
    if isinstance(node, (Finally, Globally)):
        child = _eval(node.child, signal)
        lo, hi = window_offsets(node.a, node.b, signal.dt)
        k = child.shape[0] - (hi - 1)
        if k < 1:
            raise TraceTooShortError(
                f"trace too short: window [{node.a}, {node.b}) needs "
                f"{hi} samples past each start, child is valid on {child.shape[0]}"
            )
        agg = sliding_min if isinstance(node, Globally) else sliding_max
        return agg(child[lo : lo + (hi - lo) + k - 1], hi - lo)
    raise FormulaError(f"not a formula node: {node!r}")


def robustness(signal: Signal, formula: Formula, t: float = 0.0) -> float:
    """Margin of ``formula`` on ``signal`` evaluated at on-grid time ``t``.

    Raises EvaluationError for unbound parameters or missing channels,
    OffGridError when t is not a grid point, and TraceTooShortError when
    the trace does not cover t plus the formula's horizon.
    """
    _require_concrete(formula)
    idx = signal.index_at(t)
    try:
        values = _eval(formula, signal)
    except SignalError as exc:
        raise EvaluationError(str(exc)) from None
    if idx >= values.shape[0]:
        raise TraceTooShortError(
            f"trace too short to evaluate at t={t}: needs horizon "
            f"{horizon(formula)} past t, trace ends at {signal.end_time}"
        )
    return float(values[idx])


def satisfies(signal: Signal, formula: Formula, t: float = 0.0) -> bool:
    """Boolean verdict from the margin sign.

    A margin of exactly zero reports False: the trace sits on the
    boundary, so satisfaction is not perturbation-proof.
    """
    return robustness(signal, formula, t) > 0.0

"""Adaptive embedded Runge-Kutta 5(4) propagation for one hold interval.

Within a hold interval the control is frozen, so the right-hand side is a
smooth autonomous field and a Dormand-Prince pair with standard step-size
control is appropriate.  Steps are clipped so the solver lands exactly on
every requested checkpoint; no dense-output interpolation is needed.

Termination is tolerance-based: after every accepted step the state is
tested against the target radius and the blow-up norm, and error control
forcing the step below ``min_step`` is classified as blow-up (finite escape
or loss of smoothness).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import Array
from .errors import DomainError

# Dormand-Prince 5(4) tableau.
_A = (
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th-order and embedded 4th-order weights.
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass
class HoldOutcome:
    """Result of propagating one hold interval."""

    times: List[float]
    states: List[Array]
    stop: Optional[str]  # None | "target" | "blowup"
    stop_time: Optional[float]
    last_step: float  # step-size hint for the next interval


def _error_norm(err: Array, x_old: Array, x_new: Array, rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(x_old), np.abs(x_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def integrate_hold(
    rhs: Callable[[Array], Array],
    t_start: float,
    x0: Array,
    checkpoints: Sequence[float],
    *,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    min_step: float = 1e-12,
    target_tol: float = 0.0,
    blowup_norm: float = float("inf"),
    distance: Optional[Callable[[Array], float]] = None,
    first_step: Optional[float] = None,
) -> HoldOutcome:
    """Propagate ``x' = rhs(x)`` from ``t_start`` through the checkpoints.

    ``checkpoints`` must be strictly increasing and all greater than
    ``t_start``; the last one is the interval end.  Recorded output contains
    exactly the checkpoints reached, plus the early-stop time if the state
    entered the target ball (``distance(x) <= target_tol``), exceeded
    ``blowup_norm``, or collapsed the step below ``min_step``.
    """
    cps = [float(c) for c in checkpoints]
    if not cps or any(c2 <= c1 for c1, c2 in zip(cps, cps[1:])) or cps[0] <= t_start:
        raise DomainError("checkpoints must be strictly increasing and past t_start")

    t = float(t_start)
    x = np.array(x0, dtype=float)
    span = cps[-1] - t_start
    h = first_step if first_step and first_step > 0 else span / 1000.0
    h = min(h, span)
    with np.errstate(all="ignore"):
        k1 = rhs(x)

    out = HoldOutcome(times=[], states=[], stop=None, stop_time=None, last_step=h)
    next_cp = 0
    K = np.empty((7, x.shape[0]))
    while next_cp < len(cps):
        remaining = cps[next_cp] - t
        clipped = h >= remaining * (1.0 - 1e-12)
        h_try = remaining if clipped else h

        with np.errstate(all="ignore"):
            K[0] = k1
            for i in range(1, 7):
                K[i] = rhs(x + h_try * (_A[i] @ K[:i]))
            x_new = x + h_try * (_B5 @ K)
            err = h_try * (_E @ K)

        if np.all(np.isfinite(x_new)) and np.all(np.isfinite(err)):
            err_norm = _error_norm(err, x, x_new, rel_tol, abs_tol)
        else:
            err_norm = float("inf")

        if err_norm <= 1.0:
            # Accepted: advance, record checkpoints, test stop conditions.
            t = cps[next_cp] if clipped else t + h_try
            x = x_new
            k1 = K[6]  # first-same-as-last
            if clipped:
                out.times.append(t)
                out.states.append(x.copy())
                next_cp += 1
            if float(np.linalg.norm(x)) >= blowup_norm:
                out.stop = "blowup"
            elif distance is not None and distance(x) <= target_tol:
                out.stop = "target"
            if out.stop is not None:
                out.stop_time = t
                if not out.times or out.times[-1] != t:
                    out.times.append(t)
                    out.states.append(x.copy())
                return out
            factor = _SAFETY * err_norm**-0.2 if err_norm > 0 else _MAX_FACTOR
            h = max(h, h_try) * min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            out.last_step = h
        else:
            # Rejected: shrink; a collapse below min_step ends the run.
            factor = _SAFETY * err_norm**-0.2 if np.isfinite(err_norm) else _MIN_FACTOR
            h = h_try * min(0.9, max(_MIN_FACTOR, factor))
            if h < min_step:
                out.stop = "blowup"
                out.stop_time = t
                if not out.times or out.times[-1] != t:
                    out.times.append(t)
                    out.states.append(x.copy())
                return out
    return out

"""Rescaled and control-compactified (impulsive-extended) dynamics, the
maps between original controls u and simplex controls (w0, w), and the
bidirectional time changes linking trajectories of the two systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    Array,
    ControlPolynomialSystem,
    GrowthRate,
    TrajectoryRecord,
    as_control,
    as_state,
    eval_dynamics,
)
from .errors import ImpulsiveControlError, InvariantError

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class ExtendedControl:
    """Point (w0, w) of the control simplex w0 + |w| = 1, w0 in [0, 1].

    w0 > 0 corresponds to a finite original control; w0 = 0 encodes a
    control 'at infinity' (an instantaneous jump in original time).
    """

    w0: float
    w: Array

    def __post_init__(self):
        wv = as_control(self.w)
        object.__setattr__(self, "w", wv)
        object.__setattr__(self, "w0", float(self.w0))
        if not (-SIMPLEX_TOL <= self.w0 <= 1.0 + SIMPLEX_TOL):
            raise InvariantError(f"w0={self.w0} outside [0, 1]")
        if abs(self.w0 + self.w_norm - 1.0) > SIMPLEX_TOL:
            raise InvariantError(
                f"simplex violation: w0 + |w| = {self.w0 + self.w_norm} != 1"
            )

    @property
    def w_norm(self) -> float:
        return float(np.linalg.norm(self.w))

    @property
    def m(self) -> int:
        return self.w.shape[0]

    def as_row(self) -> Array:
        return np.concatenate(([self.w0], self.w))

    @staticmethod
    def from_row(row) -> "ExtendedControl":
        row = np.asarray(row, dtype=float)
        return ExtendedControl(w0=float(row[0]), w=row[1:])


@dataclass(frozen=True)
class RestrictedControlSet:
    """Slice of the simplex with w0 >= rho; keeps synthesized feedbacks away
    from the impulsive face."""

    rho: float

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise InvariantError("rho must lie in (0, 1]")

    def contains(self, wc: ExtendedControl) -> bool:
        return wc.w0 >= self.rho - SIMPLEX_TOL


def rescaled_dynamics(sys: ControlPolynomialSystem, x, u) -> Array:
    """f(x, u) / (1 + nu(|u|)): the slowed-down vector field with the same
    trajectories as f up to a time change."""
    uv = as_control(u, sys.m)
    mag = float(np.linalg.norm(uv))
    return eval_dynamics(sys, x, uv) / (1.0 + sys.growth.value(mag))


def extended_dynamics(sys: ControlPolynomialSystem, x, wc: ExtendedControl) -> Array:
    """Compactified vector field on the simplex:

        F(x, w0, w) = sum_k f_k(x, w/|w|) * |w|**(k/d) * w0**(1 - k/d).

    At w0 = 0 only the top-order term survives (the fast dynamics); the
    conventions 0**0 = 1 and w/|w| = 0 at w = 0 apply, so no NaN is produced
    anywhere on the simplex.
    """
    if not isinstance(wc, ExtendedControl):
        raise InvariantError("extended_dynamics needs an ExtendedControl")
    xv = as_state(x, sys.n)
    d = float(sys.degree)
    wmag = wc.w_norm
    direction = wc.w / wmag if wmag > 0 else np.zeros(sys.m)

    def weight(k: int) -> float:
        expo = 1.0 - k / d
        w0_pow = 1.0 if expo == 0.0 else wc.w0**expo
        return wmag ** (k / d) * w0_pow

    return sys.coefficient_sum(xv, direction, weight)


def control_to_extended(g: GrowthRate, u) -> ExtendedControl:
    """Map an original control into the simplex:

        (w0, w)(u) = ( 1/(1+nu(|u|)),  u * nu(|u|) / (|u| (1+nu(|u|))) ).
    """
    uv = as_control(u)
    mag = float(np.linalg.norm(uv))
    nu = g.value(mag)
    denom = 1.0 + nu
    if mag == 0.0:
        return ExtendedControl(w0=1.0, w=np.zeros(uv.shape[0]))
    w = uv * (nu / (mag * denom))
    # Rewrite w0 so the simplex identity holds to rounding even when
    # 1/denom + nu/denom drifts in the last ulp.
    return ExtendedControl(w0=1.0 - float(np.linalg.norm(w)), w=w)


def extended_to_control(g: GrowthRate, wc: ExtendedControl) -> Array:
    """Inverse map u(w0, w) = (w/|w|) * nu^-1(|w| / w0); only defined off the
    impulsive face w0 = 0."""
    if wc.w0 <= 0.0:
        raise ImpulsiveControlError("no finite control corresponds to w0 = 0")
    wmag = wc.w_norm
    if wmag == 0.0:
        return np.zeros(wc.m)
    return (wc.w / wmag) * g.inverse_value(wmag / wc.w0)


@dataclass(frozen=True)
class RescaledSystem:
    """Marker wrapping a system to be simulated under rescaled dynamics."""

    base: ControlPolynomialSystem

    def rhs(self, x: Array, u: Array) -> Array:
        return rescaled_dynamics(self.base, x, u)


@dataclass(frozen=True)
class ExtendedSystem:
    """Marker wrapping a system to be simulated under extended dynamics."""

    base: ControlPolynomialSystem

    def rhs(self, x: Array, wc: ExtendedControl) -> Array:
        return extended_dynamics(self.base, x, wc)


def _interval_controls(traj: TrajectoryRecord) -> Array:
    if traj.control_kind != "original":
        raise InvariantError("time changes operate on original-control records")
    return traj.controls


def time_change_forward(traj: TrajectoryRecord, g: GrowthRate) -> TrajectoryRecord:
    """Reparametrize a trajectory of f into one of the rescaled system.

    The new clock is s(t) = integral of 1 + nu(|u|); with piecewise-constant
    controls the integral is evaluated exactly interval by interval.  States
    and control values are unchanged, only the grid moves.
    """
    controls = _interval_controls(traj)
    t = traj.times
    s = np.empty_like(t)
    s[0] = t[0]
    for i in range(len(t) - 1):
        factor = 1.0 + g.value(float(np.linalg.norm(controls[i])))
        s[i + 1] = s[i] + factor * (t[i + 1] - t[i])
    return TrajectoryRecord(
        times=s,
        states=traj.states,
        controls=controls,
        control_kind="original",
        # Linear interpolation is exact: the clock is affine on each interval.
        status=traj.status,
        status_time=float(np.interp(traj.status_time, t, s)),
        frozen_point=traj.frozen_point,
    )


def time_change_backward(traj: TrajectoryRecord, g: GrowthRate) -> TrajectoryRecord:
    """Inverse reparametrization, t(s) = integral of 1/(1 + nu(|v|)).

    Round trip with :func:`time_change_forward` reproduces the original grid
    to rounding error.
    """
    controls = _interval_controls(traj)
    s = traj.times
    t = np.empty_like(s)
    t[0] = s[0]
    for i in range(len(s) - 1):
        factor = 1.0 + g.value(float(np.linalg.norm(controls[i])))
        t[i + 1] = t[i] + (s[i + 1] - s[i]) / factor
    return TrajectoryRecord(
        times=t,
        states=traj.states,
        controls=controls,
        control_kind="original",
        status=traj.status,
        status_time=float(np.interp(traj.status_time, s, t)),
        frozen_point=traj.frozen_point,
    )

"""Sample-and-hold and open-loop simulation.

A sample-and-hold run freezes the feedback value at each partition node and
integrates the resulting smooth field over the following interval, exactly
as the sampling-solution construction prescribes.  Runs terminate on target
hit (distance within tolerance), blow-up (norm or step collapse), or at the
horizon.  After a finite target-hit time the state is frozen at the last
computed point.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import (
    Array,
    ControlPolynomialSystem,
    Partition,
    Target,
    TerminationStatus,
    TrajectoryRecord,
    as_control,
    as_state,
)
from .errors import ControlSetError, DomainError, FeedbackError, InvariantError
from .integrate import integrate_hold
from .transforms import ExtendedControl, ExtendedSystem, RescaledSystem, extended_dynamics

SystemLike = Union[ControlPolynomialSystem, RescaledSystem, ExtendedSystem]


@dataclass(frozen=True)
class Feedback:
    """State feedback, possibly discontinuous and unbounded near the target.

    ``kind`` is "original" (values in the control cone U, also used for the
    rescaled system) or "extended" (values on the simplex closure).
    """

    fn: Callable[[Array], object]
    kind: str
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("original", "extended"):
            raise InvariantError("feedback kind must be 'original' or 'extended'")

    @staticmethod
    def constant(u, label: str = "") -> "Feedback":
        uv = as_control(u)
        return Feedback(fn=lambda x: uv, kind="original", label=label or f"u={uv}")

    @staticmethod
    def constant_extended(w0: float, w, label: str = "") -> "Feedback":
        wc = ExtendedControl(w0=w0, w=as_control(w))
        return Feedback(fn=lambda x: wc, kind="extended", label=label or f"(w0,w)=({w0},{w})")


def feedback_sup_norm(feedback: Feedback, states) -> float:
    """Empirical supremum of the feedback magnitude over sample states.

    Used to spot-check local boundedness away from the target.
    """
    worst = 0.0
    for x in states:
        value = feedback.fn(as_state(x))
        mag = value.w_norm if isinstance(value, ExtendedControl) else float(
            np.linalg.norm(as_control(value))
        )
        worst = max(worst, mag)
    return worst


@dataclass(frozen=True)
class SimOptions:
    """Numerical policy for a simulation run."""

    target_tol: float = 1e-8
    blowup_norm: float = 1e9
    min_step: float = 1e-12
    horizon: float = 10.0
    integrator_rel_tol: float = 1e-10
    integrator_abs_tol: float = 1e-12

    def __post_init__(self):
        for name in (
            "target_tol",
            "blowup_norm",
            "min_step",
            "horizon",
            "integrator_rel_tol",
            "integrator_abs_tol",
        ):
            if not getattr(self, name) > 0:
                raise InvariantError(f"{name} must be positive")


@dataclass(frozen=True)
class PiecewiseConstantSignal:
    """Open-loop control signal: values[i] holds on [breaks[i], breaks[i+1]),
    the last value holds up to the horizon."""

    breaks: Array
    values: Array

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.breaks, dtype=float))
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if b.ndim != 1 or b[0] != 0.0 or not np.all(np.diff(b) > 0):
            raise InvariantError("breaks must start at 0 and increase strictly")
        if v.shape[0] != b.shape[0]:
            raise InvariantError("need one control value per break")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @staticmethod
    def constant(u) -> "PiecewiseConstantSignal":
        return PiecewiseConstantSignal(breaks=np.array([0.0]), values=[as_control(u)])


def uniform_partition(delta: float, horizon: float) -> Partition:
    """Partition with nodes k*delta, closed off at the horizon."""
    if not delta > 0 or not horizon > 0:
        raise DomainError("delta and horizon must be positive")
    if delta > horizon:
        raise DomainError("delta must not exceed the horizon")
    count = int(math.floor(horizon / delta + 1e-12))
    times = delta * np.arange(count + 1)
    if horizon - times[-1] > 1e-12 * max(horizon, 1.0):
        times = np.append(times, horizon)
    else:
        times[-1] = horizon
    return Partition(times=times)


class _HoldEngine:
    """Integrates a sequence of hold intervals and accumulates the record."""

    def __init__(self, system: SystemLike, z, target: Target, opts: SimOptions, record_times):
        self.base, self.rhs, self.validate, self.control_kind = _dispatch(system)
        x0 = as_state(z, self.base.n)
        if target.distance(x0) <= opts.target_tol:
            raise DomainError("initial state is already within the target tolerance")
        self.target = target
        self.opts = opts
        self.record_times = (
            None if record_times is None else sorted(float(t) for t in record_times)
        )
        self.times = [0.0]
        self.states = [x0]
        self.controls: list = []
        self.status = TerminationStatus.HORIZON_END
        self.status_time = opts.horizon
        self.frozen_point = None
        self._step_hint = None

    @property
    def state(self) -> Array:
        return self.states[-1]

    def _checkpoints(self, t0: float, t1: float) -> list:
        cps = []
        if self.record_times is not None:
            for rt in self.record_times:
                if t0 < rt < t1 and (not cps or rt > cps[-1]):
                    cps.append(rt)
        if not cps or cps[-1] < t1:
            cps.append(t1)
        return cps

    def run_interval(self, t0: float, t1: float, control) -> bool:
        """Integrate one hold interval; returns False when the run stopped."""
        prepared, control_row = self.validate(control)
        opts = self.opts
        outcome = integrate_hold(
            lambda xx: self.rhs(xx, prepared),
            t0,
            self.state,
            self._checkpoints(t0, t1),
            rel_tol=opts.integrator_rel_tol,
            abs_tol=opts.integrator_abs_tol,
            min_step=opts.min_step,
            target_tol=opts.target_tol,
            blowup_norm=opts.blowup_norm,
            distance=self.target.distance,
            first_step=self._step_hint,
        )
        self._step_hint = outcome.last_step
        for t, x in zip(outcome.times, outcome.states):
            if t > self.times[-1]:
                self.times.append(t)
                self.states.append(x)
                self.controls.append(control_row)
        if outcome.stop == "target":
            self.status = TerminationStatus.TARGET_REACHED
            self.status_time = outcome.stop_time
            self.frozen_point = self.state.copy()
            self._freeze_fill()
            return False
        if outcome.stop == "blowup":
            self.status = TerminationStatus.BLOW_UP
            self.status_time = outcome.stop_time
            return False
        return True

    def _freeze_fill(self) -> None:
        if self.record_times is None:
            return
        idle = _idle_control_row(self.control_kind, self.base.m)
        frozen = self.state
        for rt in self.record_times:
            if rt > self.times[-1] and rt <= self.opts.horizon:
                self.times.append(rt)
                self.states.append(frozen.copy())
                self.controls.append(idle)

    def to_record(self) -> TrajectoryRecord:
        width = len(self.controls[0]) if self.controls else (
            self.base.m + 1 if self.control_kind == "extended" else self.base.m
        )
        return TrajectoryRecord(
            times=np.array(self.times),
            states=np.vstack(self.states),
            controls=np.vstack(self.controls) if self.controls else np.empty((0, width)),
            control_kind=self.control_kind,
            status=self.status,
            status_time=self.status_time,
            frozen_point=self.frozen_point,
        )


def _dispatch(system: SystemLike):
    """Return (base, rhs(x, prepared), validate(control), control_kind)."""
    if isinstance(system, ControlPolynomialSystem):
        base = system

        def rhs(x, c):
            return base.coefficient_sum(x, c[1], lambda k: c[0] ** k)

        def validate(c):
            uv = as_control(c, base.m)
            if not base.cone_contains(uv):
                raise ControlSetError(f"control {uv} outside the admissible cone")
            mag = float(np.linalg.norm(uv))
            direction = uv / mag if mag > 0 else np.zeros(base.m)
            return (mag, direction), uv

        return base, rhs, validate, "original"

    if isinstance(system, RescaledSystem):
        base = system.base

        def rhs(x, c):
            return base.coefficient_sum(x, c[1], lambda k: c[0] ** k) / c[2]

        def validate(c):
            uv = as_control(c, base.m)
            if not base.cone_contains(uv):
                raise ControlSetError(f"control {uv} outside the admissible cone")
            mag = float(np.linalg.norm(uv))
            direction = uv / mag if mag > 0 else np.zeros(base.m)
            return (mag, direction, 1.0 + base.growth.value(mag)), uv

        return base, rhs, validate, "original"

    if isinstance(system, ExtendedSystem):
        base = system.base

        def rhs(x, wc):
            return extended_dynamics(base, x, wc)

        def validate(c):
            if not isinstance(c, ExtendedControl):
                raise ControlSetError("extended simulation needs ExtendedControl values")
            if c.m != base.m:
                raise ControlSetError(f"expected control dimension {base.m}, got {c.m}")
            if c.w_norm > 0 and not base.cone_contains(c.w):
                raise ControlSetError("w direction outside the admissible cone")
            return c, c.as_row()

        return base, rhs, validate, "extended"

    raise DomainError(f"unsupported system object {system!r}")


def _idle_control_row(control_kind: str, m: int) -> Array:
    if control_kind == "extended":
        return np.concatenate(([1.0], np.zeros(m)))
    return np.zeros(m)


def simulate_sample_hold(
    system: SystemLike,
    feedback: Feedback,
    partition: Partition,
    z,
    target: Target,
    opts: SimOptions,
    record_times: Optional[Sequence[float]] = None,
) -> TrajectoryRecord:
    """Integrate the sampling trajectory from ``z`` under ``feedback``.

    On each partition interval [t_{k-1}, t_k] the control is frozen at the
    feedback value in the left node.  The partition must cover
    ``opts.horizon``; nodes beyond the horizon are dropped.  ``record_times``
    adds states between nodes to the record (nodes are always recorded).
    """
    _, _, _, control_kind = _dispatch(system)
    if feedback.kind != control_kind:
        raise DomainError(
            f"feedback kind '{feedback.kind}' does not match system form '{control_kind}'"
        )
    if partition.end < opts.horizon * (1.0 - 1e-12):
        raise DomainError("partition does not cover the simulation horizon")

    nodes = partition.times[partition.times < opts.horizon].copy()
    nodes = np.append(nodes, opts.horizon)

    engine = _HoldEngine(system, z, target, opts, record_times)
    for k in range(len(nodes) - 1):
        x_node = engine.state
        try:
            control = feedback.fn(x_node)
        except Exception as exc:  # rewrap with the offending state attached
            raise FeedbackError(f"feedback failed at state {x_node}: {exc}") from exc
        if not engine.run_interval(float(nodes[k]), float(nodes[k + 1]), control):
            break
    return engine.to_record()


def simulate_open_loop(
    system: SystemLike,
    signal: PiecewiseConstantSignal,
    z,
    target: Target,
    opts: SimOptions,
    record_times: Optional[Sequence[float]] = None,
) -> TrajectoryRecord:
    """Integrate the open-loop trajectory under a piecewise-constant signal."""
    breaks = signal.breaks[signal.breaks < opts.horizon]
    edges = np.append(breaks, opts.horizon)
    engine = _HoldEngine(system, z, target, opts, record_times)
    for k in range(len(edges) - 1):
        if not engine.run_interval(float(edges[k]), float(edges[k + 1]), signal.values[k]):
            break
    return engine.to_record()


def trajectory_to_csv(record: TrajectoryRecord, target: Target, fh) -> None:
    """Write a record as CSV: t, x_1..x_n, controls, d_to_target.

    Control columns are u_1..u_m, or w0, w_1..w_m for extended records; row
    i carries the control in force from time i on (the last row repeats the
    final control).  The termination status follows as a trailing comment.
    """
    n = record.n
    width = record.controls.shape[1] if record.controls.size else 0
    if record.control_kind == "extended":
        control_names = ["w0"] + [f"w_{j}" for j in range(1, width)]
    else:
        control_names = [f"u_{j}" for j in range(1, width + 1)]
    header = ["t"] + [f"x_{i}" for i in range(1, n + 1)] + control_names + ["d_to_target"]
    fh.write(",".join(header) + "\n")
    last = len(record.times) - 1
    for i, t in enumerate(record.times):
        row = [repr(float(t))]
        row += [repr(float(v)) for v in record.states[i]]
        if width:
            ci = min(i, last - 1)
            row += [repr(float(v)) for v in record.controls[ci]]
        row.append(repr(float(target.distance(record.states[i]))))
        fh.write(",".join(row) + "\n")
    fh.write(f"# status={record.status.value} status_time={record.status_time!r}\n")


def trajectory_csv_text(record: TrajectoryRecord, target: Target) -> str:
    buf = io.StringIO()
    trajectory_to_csv(record, target, buf)
    return buf.getvalue()

"""Domain types shared by every module: control systems, targets, growth
rates, class-KL descent rates, partitions, and trajectory records.

States and controls are plain 1-d numpy arrays.  All types here are frozen
after construction and all operations are pure functions, so everything is
safe to share between threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ControlSetError, DomainError, InvariantError

Array = np.ndarray

#: Relative tolerance for algebraic identities (round trips, conjugacy).
ALGEBRAIC_RTOL = 1e-10
#: Absolute tolerance for comparing ODE states.
STATE_ATOL = 1e-8


def as_state(x, n: Optional[int] = None) -> Array:
    """Coerce ``x`` to a finite 1-d float array, optionally of dimension n."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"state must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("state contains NaN or Inf")
    if n is not None and arr.shape[0] != n:
        raise DomainError(f"expected state dimension {n}, got {arr.shape[0]}")
    return arr


def as_control(u, m: Optional[int] = None) -> Array:
    """Coerce ``u`` to a finite 1-d float array, optionally of dimension m."""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"control must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("control contains NaN or Inf")
    if m is not None and arr.shape[0] != m:
        raise DomainError(f"expected control dimension {m}, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class Target:
    """Closed target set, represented through its distance function.

    ``distance`` must vanish exactly on the set and be 1-Lipschitz.
    ``boundary_radius`` is the radius of a ball witnessing that the boundary
    is compact; it is trusted, not verified.
    """

    distance: Callable[[Array], float]
    boundary_radius: float
    interior_contains: Callable[[Array], bool]
    label: str = "target"

    def __post_init__(self):
        if not self.boundary_radius > 0:
            raise InvariantError("boundary_radius must be positive")

    @staticmethod
    def point(n: int = 1) -> "Target":
        """The origin of R^n as a target."""
        return Target(
            distance=lambda x: float(np.linalg.norm(x)),
            boundary_radius=1.0,
            interior_contains=lambda x: False,
            label="point",
        )

    @staticmethod
    def ball(radius: float, n: int = 1) -> "Target":
        """Closed origin-centered ball of the given radius."""
        if not radius > 0:
            raise InvariantError("ball radius must be positive")
        return Target(
            distance=lambda x: max(float(np.linalg.norm(x)) - radius, 0.0),
            boundary_radius=radius,
            interior_contains=lambda x: float(np.linalg.norm(x)) < radius,
            label=f"ball({radius})",
        )


_GROWTH_CHECK_GRID = np.logspace(-6.0, 6.0, 25)


@dataclass(frozen=True)
class GrowthRate:
    """Strictly increasing bijection of [0, inf) bounding control growth.

    Either ``degree`` is set (nu(r) = r**degree, exact inverse), or a
    (forward, inverse) pair of callables is supplied.  Generic pairs are
    spot-checked on a log grid at construction.
    """

    degree: Optional[int] = None
    forward: Optional[Callable[[float], float]] = None
    inverse: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.degree is not None:
            if self.forward is not None or self.inverse is not None:
                raise InvariantError("give either a degree or a function pair, not both")
            if int(self.degree) != self.degree or self.degree < 1:
                raise InvariantError("degree must be an integer >= 1")
        else:
            if self.forward is None or self.inverse is None:
                raise InvariantError("generic growth rate needs forward and inverse")
            if abs(self.forward(0.0)) > 1e-12:
                raise InvariantError("nu(0) must be 0")
            vals = np.array([self.forward(r) for r in _GROWTH_CHECK_GRID])
            if not np.all(np.diff(vals) > 0):
                raise InvariantError("nu is not strictly increasing on the check grid")
            for r in _GROWTH_CHECK_GRID:
                rt = self.forward(self.inverse(r))
                if abs(rt - r) > 1e-12 * max(abs(r), 1.0):
                    raise InvariantError("nu(nu^-1(r)) != r beyond 1e-12 relative")

    def value(self, r: float) -> float:
        if r < 0:
            raise DomainError("growth rate is only defined for r >= 0")
        if self.degree is not None:
            return float(r) ** self.degree
        return float(self.forward(float(r)))

    def inverse_value(self, r: float) -> float:
        if r < 0:
            raise DomainError("inverse growth rate is only defined for r >= 0")
        if self.degree is not None:
            d = self.degree
            if d == 1:
                return float(r)
            if d == 2:
                return math.sqrt(r)
            if d == 3:
                return float(np.cbrt(r))
            return float(r) ** (1.0 / d)
        return float(self.inverse(float(r)))


def nu_eval(g: GrowthRate, r: float) -> float:
    """Evaluate the growth rate nu at r >= 0."""
    return g.value(r)


def nu_inverse(g: GrowthRate, r: float) -> float:
    """Evaluate the exact inverse nu^-1 at r >= 0."""
    return g.inverse_value(r)


@dataclass(frozen=True)
class ControlPolynomialSystem:
    """Dynamics with a finite homogeneous expansion in the control magnitude:

        f(x, u) = sum_k f_k(x, u/|u|) * |u|**k,   k = 0..degree,

    with the convention u/|u| = 0 at u = 0.  The control set is a closed
    cone described by a membership test.  The growth rate nu(r) = r**degree
    is determined by the expansion degree.
    """

    n: int
    m: int
    degree: int
    terms: tuple  # of (k, coefficient) with coefficient(x, direction) -> Array
    cone_contains: Callable[[Array], bool]
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvariantError("state and control dimensions must be >= 1")
        if self.degree < 1:
            raise InvariantError("control degree must be >= 1")
        seen = set()
        for k, _ in self.terms:
            if k < 0 or k > self.degree or k in seen:
                raise InvariantError(f"bad or duplicate homogeneity order {k}")
            seen.add(k)
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def growth(self) -> GrowthRate:
        return GrowthRate(degree=self.degree)

    def coefficient_sum(self, x: Array, direction: Array, weights) -> Array:
        """sum_k f_k(x, direction) * weights[k] for per-order scalar weights."""
        out = np.zeros(self.n)
        for k, coeff in self.terms:
            w = weights(k)
            if w != 0.0:
                out = out + np.asarray(coeff(x, direction), dtype=float) * w
        return out


def eval_dynamics(sys: ControlPolynomialSystem, x, u) -> Array:
    """Evaluate f(x, u) = sum_k f_k(x, u/|u|) |u|**k.

    Raises ControlSetError when u is not in the control cone.
    """
    xv = as_state(x, sys.n)
    uv = as_control(u, sys.m)
    if not sys.cone_contains(uv):
        raise ControlSetError(f"control {uv} is outside the admissible cone")
    mag = float(np.linalg.norm(uv))
    direction = uv / mag if mag > 0 else np.zeros(sys.m)
    return sys.coefficient_sum(xv, direction, lambda k: mag**k)


@dataclass(frozen=True)
class KLFunction:
    """Two-argument comparison function beta(r, t).

    ``strict_at_zero`` records whether beta(R, 0) > R for all R > 0, the
    strict-expansion property required by the strip recursion.
    """

    fn: Callable[[float, float], float]
    strict_at_zero: bool = False
    label: str = "beta"

    def __call__(self, r: float, t: float) -> float:
        return float(self.fn(float(r), float(t)))

    @staticmethod
    def exponential(scale: float = 1.0, rate: float = 0.5) -> "KLFunction":
        """beta(r, t) = scale * r * exp(-rate * t)."""
        if scale <= 0 or rate <= 0:
            raise InvariantError("scale and rate must be positive")
        return KLFunction(
            fn=lambda r, t: scale * r * math.exp(-rate * t),
            strict_at_zero=scale > 1.0,
            label=f"{scale}*r*exp(-{rate}*t)",
        )


@dataclass(frozen=True)
class KLViolation:
    kind: str  # zero-at-zero | increasing-in-r | decreasing-in-t | decay | strict-at-zero
    r: float
    t: float
    detail: str


@dataclass(frozen=True)
class KLCheckReport:
    violations: tuple
    strict_at_zero_observed: bool

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def kl_check(beta: KLFunction, r_grid, t_grid) -> KLCheckReport:
    """Check the class-KL axioms of ``beta`` on the given grid product.

    Report-only: monotonicity is tested strictly along both grids, the zero
    section beta(0, t) = 0 is tested exactly, and decay to zero is tested
    heuristically by requiring beta to at least halve between the grid's
    largest time T and 64 T.
    """
    rs = np.sort(np.unique(np.asarray(r_grid, dtype=float)))
    ts = np.sort(np.unique(np.asarray(t_grid, dtype=float)))
    if rs.size == 0 or ts.size == 0 or not np.all(np.isfinite(rs)) or not np.all(np.isfinite(ts)):
        raise DomainError("kl_check needs finite, nonempty grids")
    if np.any(rs <= 0) or np.any(ts < 0):
        raise DomainError("r grid must be positive and t grid nonnegative")

    violations = []
    for t in ts:
        v0 = beta(0.0, t)
        if abs(v0) > 1e-12:
            violations.append(KLViolation("zero-at-zero", 0.0, float(t), f"beta(0,{t})={v0}"))
        vals = np.array([beta(r, t) for r in rs])
        bad = np.nonzero(np.diff(vals) <= 0)[0]
        for i in bad:
            violations.append(
                KLViolation("increasing-in-r", float(rs[i + 1]), float(t),
                            f"beta not strictly increasing across r={rs[i]}..{rs[i + 1]}")
            )
    for r in rs:
        vals = np.array([beta(r, t) for t in ts])
        bad = np.nonzero(np.diff(vals) >= 0)[0]
        for i in bad:
            violations.append(
                KLViolation("decreasing-in-t", float(r), float(ts[i + 1]),
                            f"beta not strictly decreasing across t={ts[i]}..{ts[i + 1]}")
            )
        horizon = max(float(ts[-1]), 1.0)
        if beta(r, 64.0 * horizon) > 0.5 * beta(r, horizon) + 1e-12:
            violations.append(
                KLViolation("decay", float(r), 64.0 * horizon,
                            "beta(r, t) does not appear to decay to 0")
            )

    observed_strict = all(beta(r, 0.0) > r for r in rs)
    if beta.strict_at_zero and not observed_strict:
        for r in rs:
            if beta(r, 0.0) <= r:
                violations.append(
                    KLViolation("strict-at-zero", float(r), 0.0,
                                f"declared strict but beta({r},0)={beta(r, 0.0)} <= {r}")
                )
                break
    return KLCheckReport(violations=tuple(violations), strict_at_zero_observed=observed_strict)


@dataclass(frozen=True)
class Partition:
    """Finite prefix of a partition of [0, +inf): strictly increasing times
    starting at 0.  The diameter is the largest gap."""

    times: Array

    def __post_init__(self):
        arr = np.asarray(self.times, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise InvariantError("partition needs at least two times")
        if arr[0] != 0.0:
            raise InvariantError("partition must start at t0 = 0")
        if not np.all(np.diff(arr) > 0):
            raise InvariantError("partition times must be strictly increasing")
        object.__setattr__(self, "times", arr)

    @property
    def diameter(self) -> float:
        return float(np.max(np.diff(self.times)))

    @property
    def end(self) -> float:
        return float(self.times[-1])


class TerminationStatus(enum.Enum):
    TARGET_REACHED = "TARGET_REACHED"
    BLOW_UP = "BLOW_UP"
    HORIZON_END = "HORIZON_END"


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled trajectory with per-interval controls.

    ``controls[i]`` is the control in force on [times[i], times[i+1]).  For
    ``control_kind == "extended"`` each control row is (w0, w_1..w_m).
    ``status_time`` is the target-hit time, the last valid time before
    blow-up, or the horizon.  After a finite target-hit time the state is
    frozen at ``frozen_point``.
    """

    times: Array
    states: Array
    controls: Array
    control_kind: str
    status: TerminationStatus
    status_time: float
    frozen_point: Optional[Array] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        u = np.asarray(self.controls, dtype=float)
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.shape[0]:
            raise InvariantError("times and states have inconsistent shapes")
        if u.shape[0] != max(t.shape[0] - 1, 0):
            raise InvariantError("need exactly one control per time interval")
        if not np.all(np.diff(t) > 0):
            raise InvariantError("record times must be strictly increasing")
        if not np.all(np.isfinite(x)):
            raise InvariantError("record contains non-finite states")
        if self.control_kind not in ("original", "extended"):
            raise InvariantError("control_kind must be 'original' or 'extended'")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "controls", u)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def distances(self, target: Target) -> Array:
        return np.array([target.distance(s) for s in self.states])

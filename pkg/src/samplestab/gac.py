"""Descent-rate machinery and empirical stabilizability certification.

The strip radii r_{i-1} = beta(r_i, 0) tile the distance axis into annuli;
dwell times with beta(r_{i-1}, t_i) <= r_i bound how long a trajectory can
linger per annulus, and the resulting piecewise-constant envelope b(R, t)
is dominated by a continuous class-KL majorant.  The certifier runs
sample-and-hold sweeps and reports either a falsification certificate or an
empirical pass at the sampled resolution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .core import Array, KLFunction, Target, TerminationStatus, TrajectoryRecord, as_state
from .errors import DecayError, DomainError, StrictnessError, WindowError
from .sampling import Feedback, SimOptions, simulate_sample_hold, uniform_partition

STRIP_RECURSION_TOL = 1e-10
DESCENT_DISTANCE_TOL = 1e-6


@dataclass(frozen=True)
class StripSystem:
    """Radii r_i over an index window [i_min, i_max], strictly decreasing in
    i, generated by r_{i-1} = beta(r_i, 0) and anchored at r_0 = 1."""

    beta: KLFunction
    i_min: int
    radii: Array

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size < 2:
            raise DomainError("strip system needs at least two radii")
        if not np.all(np.diff(r) < 0):
            raise StrictnessError("strip radii must be strictly decreasing")
        object.__setattr__(self, "radii", r)

    @property
    def i_max(self) -> int:
        return self.i_min + self.radii.size - 1

    def radius(self, i: int) -> float:
        if i < self.i_min or i > self.i_max:
            raise WindowError(f"strip index {i} outside window [{self.i_min}, {self.i_max}]")
        return float(self.radii[i - self.i_min])

    def index_of(self, R: float) -> int:
        """The unique i with r_i <= R < r_{i-1} (half-open toward larger R)."""
        asc = self.radii[::-1]
        pos = int(np.searchsorted(asc, R, side="right"))
        if pos < 1 or pos > asc.size - 1:
            raise WindowError(
                f"R={R} outside the covered range [{asc[0]}, {asc[-1]}); widen the window"
            )
        return self.i_max - pos + 1


def strip_radii(beta: KLFunction, i_min: int, i_max: int) -> StripSystem:
    """Build the radius ladder on [i_min, i_max] with r_0 = 1.

    Negative indices follow by direct evaluation of beta(., 0); positive
    indices invert beta(., 0) by bisection.  Requires the strict expansion
    beta(R, 0) > R.
    """
    if i_min > 0 or i_max < 0 or i_min == i_max:
        raise DomainError("index window must properly contain 0")
    if not beta.strict_at_zero:
        raise StrictnessError("beta(R, 0) > R is required to build strips")
    if not beta(1.0, 0.0) > 1.0:
        raise StrictnessError(f"beta(1, 0) = {beta(1.0, 0.0)} is not > 1")

    values = {0: 1.0}
    for i in range(0, i_min, -1):
        values[i - 1] = beta(values[i], 0.0)
        if not values[i - 1] > values[i]:
            raise StrictnessError(f"beta(R, 0) <= R at R = {values[i]}")
    for i in range(1, i_max + 1):
        target_val = values[i - 1]
        lo, hi = 0.0, target_val
        # beta(., 0) is strictly increasing with beta(hi, 0) > hi = target.
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if beta(mid, 0.0) < target_val:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(target_val, 1.0):
                break
        values[i] = 0.5 * (lo + hi)
        if not values[i] < values[i - 1]:
            raise StrictnessError(f"radius recursion stalled at index {i}")
    radii = np.array([values[i] for i in range(i_min, i_max + 1)])
    return StripSystem(beta=beta, i_min=i_min, radii=radii)


@dataclass(frozen=True)
class DwellTimes:
    """Per-strip dwell durations T_i > 0, stored from index i_first on."""

    i_first: int
    values: Array

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0 or not np.all(v > 0):
            raise DomainError("dwell times must be positive")
        object.__setattr__(self, "values", v)

    @property
    def i_last(self) -> int:
        return self.i_first + self.values.size - 1

    def time(self, i: int) -> float:
        if i < self.i_first or i > self.i_last:
            raise WindowError(f"dwell index {i} outside [{self.i_first}, {self.i_last}]")
        return float(self.values[i - self.i_first])


def descent_times(
    beta: KLFunction, strips: StripSystem, max_time: float = 1e6
) -> DwellTimes:
    """Smallest times t_i with beta(r_{i-1}, t_i) <= r_i, one per strip.

    Bisection on the strictly decreasing map t -> beta(r_{i-1}, t); the
    returned endpoint always satisfies the inequality.  Raises DecayError
    when beta fails to fall below r_i within max_time.
    """
    times = []
    for i in range(strips.i_min + 1, strips.i_max + 1):
        source = strips.radius(i - 1)
        level = strips.radius(i)
        hi = 1.0
        while beta(source, hi) > level:
            hi *= 2.0
            if hi > max_time:
                raise DecayError(
                    f"beta({source}, t) stays above {level} up to t = {max_time}"
                )
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if beta(source, mid) > level:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12:
                break
        times.append(hi)
    return DwellTimes(i_first=strips.i_min + 1, values=np.array(times))


@dataclass(frozen=True)
class PiecewiseB:
    """Step envelope b(R, t) = r_{i(R) + N - 2} where N counts elapsed dwell
    periods of the strip schedule starting at i(R)."""

    strips: StripSystem
    dwell: DwellTimes

    def value(self, R: float, t: float) -> float:
        if R < 0 or t < 0:
            raise DomainError("b is defined for R, t >= 0")
        if R == 0.0:
            return 0.0
        i = self.strips.index_of(R)
        idx, exhausted = self._shifted_index(i, t)
        if exhausted:
            raise WindowError("dwell schedule exhausted; widen the window")
        if idx < self.strips.i_min:
            raise WindowError(f"radius index {idx} below the stored window")
        return self.strips.radius(idx)

    def value_clamped(self, R: float, t: float) -> float:
        """Window-saturating variant used to build the continuous majorant."""
        if R <= 0.0:
            return 0.0
        try:
            i = self.strips.index_of(R)
        except WindowError:
            i = self.strips.i_max if R < self.strips.radii[-1] else self.strips.i_min + 1
        idx, _ = self._shifted_index(i, t)
        idx = min(max(idx, self.strips.i_min), self.strips.i_max)
        return self.strips.radius(idx)

    def _shifted_index(self, i: int, t: float):
        """(i + N - 2, exhausted) for the dwell phase N at time t."""
        N = 0
        acc = self.dwell.time(i) if i <= self.dwell.i_last else None
        if acc is None:
            return i - 2, True
        while t >= acc:
            N += 1
            if i + N > self.dwell.i_last:
                return i + N - 2, True
            acc += self.dwell.time(i + N)
        return i + N - 2, False

    def time_knots(self) -> Array:
        """All schedule boundaries: cumulative dwell sums from every strip."""
        knots = {0.0}
        for i in range(self.dwell.i_first, self.dwell.i_last + 1):
            acc = 0.0
            for j in range(i, self.dwell.i_last + 1):
                acc += self.dwell.time(j)
                knots.add(acc)
        return np.array(sorted(knots))


def piecewise_b(
    strips: StripSystem, dwell: DwellTimes, horizon: Optional[float] = None
) -> PiecewiseB:
    """Assemble the step envelope, checking index alignment and, when a
    horizon is given, that the stored dwell times add up past it."""
    if dwell.i_first < strips.i_min or dwell.i_last > strips.i_max:
        raise DomainError("dwell window must lie inside the strip window")
    if horizon is not None and float(np.sum(dwell.values)) < horizon:
        raise DomainError("stored dwell times do not cover the horizon; widen the window")
    return PiecewiseB(strips=strips, dwell=dwell)


def kl_majorant(b: PiecewiseB, strict_eps: float = 1e-6) -> KLFunction:
    """Continuous class-KL function dominating the step envelope.

    Construction: evaluate b on the cells of the (radii x schedule-boundary)
    grid, assign every grid corner the maximum over its adjacent cells, make
    the corner grid monotone (running maxima), and interpolate bilinearly.
    A convex combination of corner values can never fall below the enclosed
    cell value, so domination holds pointwise wherever b is defined.  Beyond
    the grid the majorant grows linearly in R and decays exponentially in t;
    a small strictly-monotone bump enforces strictness of the axes.
    """
    radii_asc = b.strips.radii[::-1]
    knots_r = np.concatenate(([0.0], radii_asc))
    knots_t = b.time_knots()
    if knots_t.size < 2:
        raise DomainError("dwell schedule too short to build a majorant")

    cells = np.zeros((knots_r.size - 1, knots_t.size - 1))
    for ci in range(cells.shape[0]):
        mid_r = 0.5 * (knots_r[ci] + knots_r[ci + 1])
        for cj in range(cells.shape[1]):
            mid_t = 0.5 * (knots_t[cj] + knots_t[cj + 1])
            cells[ci, cj] = b.value_clamped(mid_r, mid_t)

    corners = np.zeros((knots_r.size, knots_t.size))
    for j in range(knots_r.size):
        for l in range(knots_t.size):
            adj = cells[max(j - 1, 0) : j + 1, max(l - 1, 0) : l + 1]
            corners[j, l] = float(np.max(adj))
    corners[0, :] = 0.0
    for j in range(1, knots_r.size):  # nondecreasing in R
        corners[j, :] = np.maximum(corners[j, :], corners[j - 1, :])
    for l in range(knots_t.size - 2, -1, -1):  # nonincreasing in t
        corners[:, l] = np.maximum(corners[:, l], corners[:, l + 1])

    t_box = float(knots_t[-1])
    r_box = float(knots_r[-1])
    decay = 1.0 / float(np.mean(b.dwell.values))

    def bilinear(R: float, t: float) -> float:
        j = int(np.clip(np.searchsorted(knots_r, R, side="right") - 1, 0, knots_r.size - 2))
        l = int(np.clip(np.searchsorted(knots_t, t, side="right") - 1, 0, knots_t.size - 2))
        fr = (R - knots_r[j]) / (knots_r[j + 1] - knots_r[j])
        ft = (t - knots_t[l]) / (knots_t[l + 1] - knots_t[l])
        top = corners[j, l] * (1 - ft) + corners[j, l + 1] * ft
        bot = corners[j + 1, l] * (1 - ft) + corners[j + 1, l + 1] * ft
        return float(top * (1 - fr) + bot * fr)

    def fn(R: float, t: float) -> float:
        if R < 0 or t < 0:
            raise DomainError("majorant defined for R, t >= 0")
        if R == 0.0:
            return 0.0
        te = min(t, t_box)
        base = bilinear(min(R, r_box), te)
        if R > r_box:
            base *= R / r_box
        if t > t_box:
            base *= math.exp(-decay * (t - t_box))
        return base + strict_eps * (R / (1.0 + R)) * math.exp(-t)

    probe = np.concatenate((radii_asc, 0.5 * (radii_asc[:-1] + radii_asc[1:])))
    strict_flag = all(fn(float(R), 0.0) > R for R in probe)
    return KLFunction(fn=fn, strict_at_zero=strict_flag, label="majorant")


@dataclass(frozen=True)
class BoundViolation:
    t: float
    observed: float
    bound: float
    detail: str = ""


@dataclass(frozen=True)
class BoundReport:
    checked: int
    violations: tuple
    worst_excess: float

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def verify_descent(
    traj: TrajectoryRecord,
    beta: KLFunction,
    target: Target,
    z=None,
    tol: float = DESCENT_DISTANCE_TOL,
) -> BoundReport:
    """Check d(x(t)) <= beta(d(z), t) + tol at every recorded node."""
    z0 = as_state(z, traj.n) if z is not None else traj.states[0]
    d_z = target.distance(z0)
    violations = []
    worst = -math.inf
    for t, x in zip(traj.times, traj.states):
        d = target.distance(x)
        bound = beta(d_z, float(t))
        worst = max(worst, d - bound)
        if d > bound + tol:
            violations.append(BoundViolation(t=float(t), observed=d, bound=bound))
    return BoundReport(checked=len(traj.times), violations=tuple(violations), worst_excess=worst)


def verify_sigma_bound(
    traj: TrajectoryRecord,
    sigma: Callable[[float], float],
    target: Target,
    tol: float = DESCENT_DISTANCE_TOL,
) -> BoundReport:
    """Check |u(t)| <= sigma(d(x(t))) + tol at every recorded interval start."""
    if traj.control_kind != "original":
        raise DomainError("sigma bounds apply to original-control records")
    violations = []
    worst = -math.inf
    count = 0
    for i in range(len(traj.times) - 1):
        d = target.distance(traj.states[i])
        if d <= 0.0:
            continue
        mag = float(np.linalg.norm(traj.controls[i]))
        bound = float(sigma(d))
        count += 1
        worst = max(worst, mag - bound)
        if mag > bound + tol:
            violations.append(
                BoundViolation(t=float(traj.times[i]), observed=mag, bound=bound)
            )
    return BoundReport(checked=count, violations=tuple(violations), worst_excess=worst)


def sigma_from_runs(
    runs: Iterable[TrajectoryRecord], strips: StripSystem, target: Target
) -> Callable[[float], float]:
    """Step function r -> max control magnitude seen near the strip of r.

    The per-strip maxima are widened over the two neighboring strips, so the
    returned sigma stays valid across strip boundaries.
    """
    per_strip: dict = {}
    for traj in runs:
        if traj.control_kind != "original":
            raise DomainError("sigma_from_runs needs original-control records")
        for i in range(len(traj.times) - 1):
            d = target.distance(traj.states[i])
            if d <= 0.0:
                continue
            try:
                idx = strips.index_of(d)
            except WindowError:
                continue
            mag = float(np.linalg.norm(traj.controls[i]))
            per_strip[idx] = max(per_strip.get(idx, 0.0), mag)
    if not per_strip:
        raise DomainError("no run visited the stored strips")

    def sigma(r: float) -> float:
        idx = strips.index_of(r)
        vals = [per_strip[j] for j in (idx - 1, idx, idx + 1) if j in per_strip]
        if not vals:
            raise WindowError(f"no control data near strip {idx}")
        return max(vals)

    return sigma


@dataclass(frozen=True)
class PairCertificate:
    R: float
    r: float
    delta: float
    seeds_tested: int
    partitions_tested: int
    violations: tuple

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


@dataclass(frozen=True)
class StabilizationReport:
    pairs: tuple

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.pairs)

    @property
    def verdict(self) -> str:
        return "pass" if self.ok else "violations"

    def to_dict(self) -> dict:
        return {
            "pairs": [
                {
                    "R": p.R,
                    "r": p.r,
                    "delta": p.delta,
                    "seeds_tested": p.seeds_tested,
                    "partitions_tested": p.partitions_tested,
                    "violations": [
                        {
                            "t": v.t,
                            "observed": v.observed,
                            "bound": v.bound,
                            "detail": v.detail,
                        }
                        for v in p.violations
                    ],
                }
                for p in self.pairs
            ],
            "verdict": self.verdict,
        }


def default_seed_states(n: int):
    """Initial-condition sampler: deterministic magnitudes along random
    directions, scaled into the ball of radius R."""

    def sampler(R: float, rng: np.random.Generator):
        fractions = [1.0, 0.6, 0.25]
        out = []
        for frac in fractions:
            if n == 1:
                out.append(np.array([frac * R]))
                out.append(np.array([-frac * R]))
            else:
                e = rng.normal(size=n)
                e /= np.linalg.norm(e)
                out.append(frac * R * e)
                out.append(-frac * R * e)
        return out

    return sampler


def certify_sample_stabilizability(
    system,
    feedback: Feedback,
    beta: KLFunction,
    pairs: Sequence,
    delta: Union[float, Callable[[float, float], float]],
    seeds,
    opts: SimOptions,
    target: Target,
    fractions: Sequence[float] = (1.0, 0.75, 0.5),
    tol: float = DESCENT_DISTANCE_TOL,
    seed: int = 0,
    jobs: int = 1,
) -> StabilizationReport:
    """Sweep sample-and-hold runs and check d(x(t)) <= max(beta(d(z), t), r).

    For each pair (R, r) with 0 < r < R, each sampled start with d(z) <= R,
    and each partition diameter fraction*delta(R, r), the bound is tested at
    every recorded node.  Blow-up counts as a violation.  The report is a
    falsification certificate or an empirical pass at this resolution.
    """
    delta_fn = delta if callable(delta) else (lambda R, r: float(delta))
    tasks = []
    for R, r in pairs:
        if not 0 < r < R:
            raise DomainError(f"need 0 < r < R, got (R, r) = ({R}, {r})")
        rng = np.random.default_rng(seed)
        starts = seeds(R, rng) if callable(seeds) else list(seeds)
        starts = [
            as_state(z)
            for z in starts
            if opts.target_tol < target.distance(as_state(z)) <= R
        ]
        d_pair = float(delta_fn(R, r))
        if not d_pair > 0:
            raise DomainError("delta(R, r) must be positive")
        tasks.append((float(R), float(r), d_pair, starts))

    def run_pair(task):
        R, r, d_pair, starts = task
        violations = []
        n_partitions = 0
        for frac in fractions:
            diam = frac * d_pair
            partition = uniform_partition(diam, opts.horizon)
            n_partitions += 1
            for z in starts:
                d_z = target.distance(z)
                traj = simulate_sample_hold(system, feedback, partition, z, target, opts)
                if traj.status == TerminationStatus.BLOW_UP:
                    violations.append(
                        BoundViolation(
                            t=traj.status_time,
                            observed=math.inf,
                            bound=max(beta(d_z, traj.status_time), r),
                            detail=f"blow-up from z={z.tolist()} diam={diam}",
                        )
                    )
                    continue
                for t, x in zip(traj.times, traj.states):
                    d = target.distance(x)
                    bound = max(beta(d_z, float(t)), r)
                    if d > bound + tol:
                        violations.append(
                            BoundViolation(
                                t=float(t),
                                observed=d,
                                bound=bound,
                                detail=f"z={z.tolist()} diam={diam}",
                            )
                        )
        return PairCertificate(
            R=R,
            r=r,
            delta=d_pair,
            seeds_tested=len(starts),
            partitions_tested=n_partitions,
            violations=tuple(violations),
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_pair, tasks))
    else:
        results = [run_pair(t) for t in tasks]
    return StabilizationReport(pairs=tuple(results))

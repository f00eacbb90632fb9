"""Control Lyapunov function certification and feedback synthesis.

The decrease condition is checked through grid Hamiltonians: the infimum of
<p, F(x, w0, w)> over the compact control simplex is approximated by a grid
minimum, which is the reliable oracle; the original-control Hamiltonian over
a truncated magnitude grid exists to verify that both formulations agree in
the limit.  Subgradient selections are user-supplied; nothing here attempts
to differentiate W numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import Array, ControlPolynomialSystem, GrowthRate, as_control, as_state
from .errors import CertificationError, DomainError, InvariantError, ProjectionError
from .sampling import Feedback
from .transforms import ExtendedControl, RestrictedControlSet, control_to_extended

DEFAULT_W0_MESH = 1e-3
DEFAULT_R_MAX = 1e6


@dataclass(frozen=True)
class LyapunovCandidate:
    """Candidate W with user-supplied subgradient selections and decrease
    rate gamma.  ``subgradients(x)`` returns every covector the decrease
    condition must hold for at x."""

    value: Callable[[Array], float]
    subgradients: Callable[[Array], Sequence[Array]]
    decrease_rate: Callable[[float], float]

    def spot_check(self, states: Iterable[Array]) -> list:
        """Empirical positivity / monotonicity check; returns findings."""
        findings = []
        ws = []
        for x in states:
            xv = as_state(x)
            w = self.value(xv)
            ws.append(w)
            if not w > 0:
                findings.append(f"W({xv}) = {w} is not positive")
        if ws:
            grid = np.linspace(min(ws), max(ws), 9)
            grid = grid[grid > 0]
            gs = [self.decrease_rate(float(r)) for r in grid]
            if any(b <= a for a, b in zip(gs, gs[1:])):
                findings.append("gamma is not strictly increasing on the sampled range")
        return findings


def unit_directions(n: int, count: int = 16, seed: int = 0) -> Array:
    """Deterministic unit directions in R^n (the two signs when n = 1)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(count, n))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def cone_directions(system: ControlPolynomialSystem, count: int = 16, seed: int = 0) -> Array:
    """Unit directions of the control cone, filtered by the membership test."""
    cands = unit_directions(system.m, count=count, seed=seed)
    kept = [e for e in cands if system.cone_contains(e)]
    if not kept:
        raise DomainError("no unit direction of the control cone was found")
    return np.vstack(kept)


@dataclass(frozen=True)
class ExtendedControlGrid:
    """Mesh over the closed control simplex: w0 levels (always containing
    the impulsive face w0 = 0 and the drift vertex w0 = 1) crossed with unit
    directions of the cone."""

    w0_values: Array
    directions: Array
    mesh: float

    def __post_init__(self):
        w0 = np.unique(np.asarray(self.w0_values, dtype=float))
        if w0.size == 0 or w0[0] < 0 or w0[-1] > 1:
            raise InvariantError("w0 levels must lie in [0, 1]")
        object.__setattr__(self, "w0_values", w0)
        object.__setattr__(self, "directions", np.atleast_2d(np.asarray(self.directions, float)))

    @staticmethod
    def build(directions, mesh: float = DEFAULT_W0_MESH) -> "ExtendedControlGrid":
        if not 0 < mesh <= 0.5:
            raise DomainError("mesh must lie in (0, 0.5]")
        levels = np.linspace(0.0, 1.0, int(round(1.0 / mesh)) + 1)
        return ExtendedControlGrid(w0_values=levels, directions=directions, mesh=mesh)

    def restricted(self, rho: float) -> "ExtendedControlGrid":
        """Sub-grid of the slice w0 >= rho, always containing w0 = rho itself."""
        RestrictedControlSet(rho=rho)  # validates rho in (0, 1]
        kept = self.w0_values[self.w0_values >= rho]
        levels = np.unique(np.concatenate(([rho], kept)))
        return ExtendedControlGrid(w0_values=levels, directions=self.directions, mesh=self.mesh)


@dataclass(frozen=True)
class OriginalControlGrid:
    """Truncated mesh of the cone itself: log-spaced magnitudes (plus 0)
    crossed with unit directions."""

    magnitudes: Array
    directions: Array

    def __post_init__(self):
        mags = np.unique(np.asarray(self.magnitudes, dtype=float))
        if mags.size == 0 or mags[0] < 0:
            raise InvariantError("magnitudes must be nonnegative")
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "directions", np.atleast_2d(np.asarray(self.directions, float)))

    @staticmethod
    def build(
        directions,
        r_max: float = DEFAULT_R_MAX,
        r_min: float = 1e-3,
        per_decade: int = 40,
    ) -> "OriginalControlGrid":
        if not 0 < r_min < r_max:
            raise DomainError("need 0 < r_min < r_max")
        decades = math.log10(r_max / r_min)
        count = max(int(round(decades * per_decade)) + 1, 2)
        mags = np.concatenate(([0.0], np.geomspace(r_min, r_max, count)))
        return OriginalControlGrid(magnitudes=mags, directions=directions)


def _direction_coefficients(system: ControlPolynomialSystem, x: Array, p: Array, e: Array):
    """<p, f_k(x, e)> for every stored homogeneity order k."""
    return [(k, float(p @ np.asarray(coeff(x, e), dtype=float))) for k, coeff in system.terms]


def _simplex_values(system, x, p, e, w0: Array) -> Array:
    """<p, F(x, w0, (1-w0) e)> for a vector of w0 levels below 1."""
    d = float(system.degree)
    vals = np.zeros_like(w0)
    wmag = 1.0 - w0
    for k, c in _direction_coefficients(system, x, p, e):
        if c == 0.0:
            continue
        expo = 1.0 - k / d
        w0_pow = np.ones_like(w0) if expo == 0.0 else np.power(w0, expo)
        vals = vals + c * np.power(wmag, k / d) * w0_pow
    return vals


def _drift_value(system, x: Array, p: Array) -> float:
    """<p, F(x, 1, 0)> = <p, f_0(x, 0)> at the drift vertex."""
    zero_dir = np.zeros(system.m)
    total = 0.0
    for k, c in _direction_coefficients(system, x, p, zero_dir):
        if k == 0:
            total += c
    return total


def extended_argmin(
    system: ControlPolynomialSystem, x, p, grid: ExtendedControlGrid
) -> tuple:
    """(min value, minimizing ExtendedControl) of <p, F> over the grid."""
    xv = as_state(x, system.n)
    pv = as_state(p, system.n)
    if grid.w0_values.size == 0 or grid.directions.shape[0] == 0:
        raise DomainError("empty control grid")
    best_val = math.inf
    best_wc: Optional[ExtendedControl] = None
    interior = grid.w0_values[grid.w0_values < 1.0]
    for e in grid.directions:
        if interior.size == 0:
            break
        vals = _simplex_values(system, xv, pv, e, interior)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            w0 = float(interior[i])
            best_wc = ExtendedControl(w0=w0, w=e * (1.0 - w0))
    if grid.w0_values[-1] == 1.0:
        v = _drift_value(system, xv, pv)
        if v < best_val:
            best_val = v
            best_wc = ExtendedControl(w0=1.0, w=np.zeros(system.m))
    if best_wc is None:
        raise DomainError("empty control grid")
    return best_val, best_wc


def hamiltonian_extended(system: ControlPolynomialSystem, x, p, grid: ExtendedControlGrid) -> float:
    """Grid minimum of <p, F(x, w0, w)> over the closed simplex."""
    value, _ = extended_argmin(system, x, p, grid)
    return value


def hamiltonian_original(system: ControlPolynomialSystem, x, p, grid: OriginalControlGrid) -> float:
    """Grid minimum of <p, fbar(x, u)> over the truncated control cone.

    Converges from above to :func:`hamiltonian_extended` as the magnitude
    cap and mesh are refined.
    """
    xv = as_state(x, system.n)
    pv = as_state(p, system.n)
    if grid.magnitudes.size == 0 or grid.directions.shape[0] == 0:
        raise DomainError("empty control grid")
    d = system.degree
    best = math.inf
    positive = grid.magnitudes[grid.magnitudes > 0]
    for e in grid.directions:
        if positive.size == 0:
            break
        num = np.zeros_like(positive)
        for k, c in _direction_coefficients(system, xv, pv, e):
            if c != 0.0:
                num = num + c * np.power(positive, k)
        vals = num / (1.0 + np.power(positive, d))
        best = min(best, float(np.min(vals)))
    if grid.magnitudes[0] == 0.0:
        best = min(best, _drift_value(system, xv, pv))
    if not np.isfinite(best):
        raise DomainError("empty control grid")
    return best


@dataclass(frozen=True)
class DecreaseViolation:
    x: tuple
    p: tuple
    hamiltonian: float
    gamma_value: float

    @property
    def margin(self) -> float:
        return self.hamiltonian + self.gamma_value


@dataclass(frozen=True)
class NCurve:
    """Admissible-w0 floor estimates over a radius grid.

    ``raw`` carries the 0.9-shrunk grid estimates; ``clamped`` additionally
    enforces nondecreasing on (0, 1] and nonincreasing on [1, inf) by a
    running minimum, which can only lower values.
    """

    r_values: Array
    raw: Array
    clamped: Array

    @property
    def clamp_differs(self) -> bool:
        return bool(np.any(self.clamped < self.raw - 1e-15))

    def raw_fn(self) -> Callable[[float], float]:
        return lambda r: float(np.interp(r, self.r_values, self.raw))

    def clamped_fn(self) -> Callable[[float], float]:
        return lambda r: float(np.interp(r, self.r_values, self.clamped))

    def pairs(self, which: str = "raw") -> list:
        vals = self.raw if which == "raw" else self.clamped
        return [[float(r), float(v)] for r, v in zip(self.r_values, vals)]


@dataclass(frozen=True)
class CLFReport:
    region: str
    mesh: float
    checked: int
    worst_margin: float
    violations: tuple
    n_curve: Optional[NCurve] = None

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0

    def to_dict(self) -> dict:
        out = {
            "region": self.region,
            "mesh": self.mesh,
            "checked": self.checked,
            "worst_margin": self.worst_margin,
            "violations": [
                {
                    "x": list(v.x),
                    "p": list(v.p),
                    "H": v.hamiltonian,
                    "gamma_W": v.gamma_value,
                }
                for v in self.violations
            ],
            "N_curve": self.n_curve.pairs("raw") if self.n_curve else None,
            "N_curve_clamped": self.n_curve.pairs("clamped") if self.n_curve else None,
        }
        return out


def radial_states(
    n: int,
    r_min: float,
    r_max: float,
    count: int,
    log: bool = True,
    directions: Optional[Array] = None,
    offset: float = 0.0,
) -> list:
    """States r*e (plus an optional radial offset) covering an annulus
    around the origin; for n = 1 both signs are used."""
    if not 0 < r_min <= r_max:
        raise DomainError("need 0 < r_min <= r_max")
    if count < 1:
        raise DomainError("count must be >= 1")
    if r_min == r_max:
        radii = np.array([r_min])
    elif log:
        radii = np.geomspace(r_min, r_max, count)
    else:
        radii = np.linspace(r_min, r_max, count)
    dirs = directions if directions is not None else unit_directions(n)
    return [(offset + r) * e for r in radii for e in dirs]


def decrease_check(
    system: ControlPolynomialSystem,
    candidate: LyapunovCandidate,
    states: Iterable[Array],
    grid: ExtendedControlGrid,
    region_label: str = "annulus",
) -> CLFReport:
    """Flag every sampled (x, p) where the grid Hamiltonian fails the strict
    decrease H < -gamma(W(x)); report-only."""
    violations = []
    worst = -math.inf
    checked = 0
    for x in states:
        xv = as_state(x, system.n)
        wx = candidate.value(xv)
        thr = candidate.decrease_rate(wx)
        for p in candidate.subgradients(xv):
            pv = as_state(p, system.n)
            h = hamiltonian_extended(system, xv, pv, grid)
            checked += 1
            margin = h + thr
            worst = max(worst, margin)
            if not h < -thr:
                violations.append(
                    DecreaseViolation(
                        x=tuple(float(v) for v in xv),
                        p=tuple(float(v) for v in pv),
                        hamiltonian=h,
                        gamma_value=thr,
                    )
                )
    if checked == 0:
        worst = -math.inf
    return CLFReport(
        region=region_label,
        mesh=grid.mesh,
        checked=checked,
        worst_margin=worst,
        violations=tuple(violations),
    )


SAFETY_SHRINK = 0.9


def compute_N(
    system: ControlPolynomialSystem,
    candidate: LyapunovCandidate,
    r: float,
    grid: ExtendedControlGrid,
    level_states: Iterable[Array],
) -> float:
    """Safe admissible-w0 floor for the W-band [min(r,1), max(r,1)].

    For every sampled (x, p) in the band, the largest grid level w0 whose
    slice still contains a strictly decreasing control is recorded; the
    infimum over the band, shrunk by 0.9, is returned.

    Raises CertificationError when some sample admits no decreasing control
    at this grid resolution.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    lo, hi = min(r, 1.0), max(r, 1.0)
    band_tol = 1e-9 * max(hi, 1.0)
    floor = math.inf
    seen = 0
    for x in level_states:
        xv = as_state(x, system.n)
        wx = candidate.value(xv)
        if wx < lo - band_tol or wx > hi + band_tol:
            continue
        thr = candidate.decrease_rate(wx)
        for p in candidate.subgradients(xv):
            pv = as_state(p, system.n)
            seen += 1
            w0_best = -1.0
            interior = grid.w0_values[grid.w0_values < 1.0]
            for e in grid.directions:
                vals = _simplex_values(system, xv, pv, e, interior)
                feasible = interior[vals < -thr]
                if feasible.size:
                    w0_best = max(w0_best, float(feasible[-1]))
            if grid.w0_values[-1] == 1.0 and _drift_value(system, xv, pv) < -thr:
                w0_best = 1.0
            if w0_best < 0.0:
                raise CertificationError(
                    f"no decreasing control on the grid at x={xv}, p={pv}",
                    threshold=-thr,
                )
            floor = min(floor, w0_best)
    if seen == 0:
        raise DomainError("no level-mesh state lies in the W-band")
    return SAFETY_SHRINK * floor


def compute_N_curve(
    system: ControlPolynomialSystem,
    candidate: LyapunovCandidate,
    r_values,
    grid: ExtendedControlGrid,
    level_builder: Callable[[float, float], Iterable[Array]],
) -> NCurve:
    """Evaluate :func:`compute_N` over a radius grid and clamp monotone.

    ``level_builder(lo, hi)`` must return states sampling the W-band
    [lo, hi].
    """
    rs = np.sort(np.asarray(r_values, dtype=float))
    if rs.size == 0 or np.any(rs <= 0):
        raise DomainError("radius grid must be positive")
    raw = np.array(
        [
            compute_N(system, candidate, float(r), grid, level_builder(min(r, 1.0), max(r, 1.0)))
            for r in rs
        ]
    )
    clamped = raw.copy()
    left = np.nonzero(rs <= 1.0)[0]
    for j in range(len(left) - 2, -1, -1):
        clamped[left[j]] = min(clamped[left[j]], clamped[left[j + 1]])
    right = np.nonzero(rs >= 1.0)[0]
    for j in range(1, len(right)):
        clamped[right[j]] = min(clamped[right[j]], clamped[right[j - 1]])
    return NCurve(r_values=rs, raw=raw, clamped=clamped)


def synthesize_detail(
    system: ControlPolynomialSystem,
    candidate: LyapunovCandidate,
    n_func: Callable[[float], float],
    x,
    grid: ExtendedControlGrid,
) -> tuple:
    """(argmin control, achieved value, decrease threshold) at one state."""
    xv = as_state(x, system.n)
    wx = candidate.value(xv)
    rho = float(n_func(wx))
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"N(W(x)) = {rho} outside (0, 1]")
    p = as_state(candidate.subgradients(xv)[0], system.n)
    value, wc = extended_argmin(system, xv, p, grid.restricted(rho))
    return wc, value, -candidate.decrease_rate(wx)


def synthesize_feedback_extended(
    system: ControlPolynomialSystem,
    candidate: LyapunovCandidate,
    n_func: Callable[[float], float],
    x,
    grid: ExtendedControlGrid,
) -> ExtendedControl:
    """Grid argmin of <p(x), F(x, w0, w)> over the slice w0 >= N(W(x)).

    The slice always contains its own floor w0 = N(W(x)), so on systems
    where the objective increases with w0 the argmin sits exactly on the
    floor.  Raises CertificationError when the best value fails the strict
    decrease threshold.
    """
    wc, value, threshold = synthesize_detail(system, candidate, n_func, x, grid)
    if not value < threshold:
        raise CertificationError(
            f"no grid control achieves decrease at x={as_state(x, system.n)}: "
            f"best {value} >= {threshold}",
            best_control=wc,
            value=value,
            threshold=threshold,
        )
    return wc


def project_feedback(g: GrowthRate, wc: ExtendedControl) -> Array:
    """Original control (w/|w|) nu^-1(|w|/w0) realizing the same rescaled
    velocity as the simplex control.  Its magnitude obeys
    |u| <= nu^-1(1/w0)."""
    if wc.w0 <= 0.0:
        raise ProjectionError("w0 = 0 is an impulsive point; no finite control exists")
    wmag = wc.w_norm
    if wmag == 0.0:
        raise ProjectionError("w = 0 is drift-only; caller should emit u = 0")
    return (wc.w / wmag) * g.inverse_value(wmag / wc.w0)


def feedback_to_extended(g: GrowthRate, feedback: Feedback) -> Feedback:
    """Lift an original feedback onto the simplex pointwise."""
    if feedback.kind != "original":
        raise DomainError("feedback_to_extended expects an original-control feedback")

    def fn(x):
        return control_to_extended(g, as_control(feedback.fn(x)))

    return Feedback(fn=fn, kind="extended", label=f"lift({feedback.label})")


def synthesized_feedbacks(
    system: ControlPolynomialSystem,
    candidate: LyapunovCandidate,
    n_func: Callable[[float], float],
    grid: ExtendedControlGrid,
) -> tuple:
    """(extended, original) feedback pair produced by grid synthesis.

    The original feedback projects the simplex argmin; a drift-only argmin
    (w = 0) maps to u = 0.
    """

    def ext_fn(x):
        return synthesize_feedback_extended(system, candidate, n_func, x, grid)

    def orig_fn(x):
        wc = synthesize_feedback_extended(system, candidate, n_func, x, grid)
        try:
            return project_feedback(system.growth, wc)
        except ProjectionError:
            if wc.w_norm == 0.0:
                return np.zeros(system.m)
            raise

    return (
        Feedback(fn=ext_fn, kind="extended", label="synthesized"),
        Feedback(fn=orig_fn, kind="original", label="synthesized-projected"),
    )

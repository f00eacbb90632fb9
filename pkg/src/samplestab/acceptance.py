"""Built-in acceptance suite: the closed-form benchmark numbers and the
library-wide round-trip properties, runnable from the CLI (`example`
command) and mirrored by the test suite.

Each criterion returns a CriterionResult; run_all prints one line per
criterion and writes CLI artifacts under the given output directory.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from . import cli
from .clf import (
    ExtendedControlGrid,
    OriginalControlGrid,
    hamiltonian_extended,
    hamiltonian_original,
    project_feedback,
    synthesized_feedbacks,
)
from .core import KLFunction, TerminationStatus, TrajectoryRecord, kl_check
from .errors import SampleStabError
from .example import (
    DELTA_MAX,
    closed_form_constant_control,
    closed_form_jump,
    cubic_damped_fixture,
)
from .gac import (
    certify_sample_stabilizability,
    default_seed_states,
    descent_times,
    kl_majorant,
    piecewise_b,
    strip_radii,
)
from .clf import LyapunovCandidate
from .sampling import (
    Feedback,
    PiecewiseConstantSignal,
    SimOptions,
    simulate_open_loop,
    simulate_sample_hold,
    uniform_partition,
)
from .transforms import (
    ExtendedSystem,
    control_to_extended,
    extended_dynamics,
    extended_to_control,
    rescaled_dynamics,
    time_change_backward,
    time_change_forward,
)


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str


def _fixture_candidate(fx):
    return LyapunovCandidate(
        value=fx.lyapunov_value,
        subgradients=fx.lyapunov_subgradients,
        decrease_rate=fx.gamma,
    )


def criterion_bounded_control_floor() -> CriterionResult:
    """Constant u = 2 from z = 1 stalls at 1/sqrt(2) and tracks the closed
    form to 1e-6 at 100 checkpoints, in under a second."""
    fx = cubic_damped_fixture()
    checkpoints = np.linspace(0.2, 20.0, 100)
    start = time.perf_counter()
    traj = simulate_open_loop(
        fx.system,
        PiecewiseConstantSignal.constant([2.0]),
        [1.0],
        fx.target,
        SimOptions(horizon=20.0),
        record_times=checkpoints,
    )
    elapsed = time.perf_counter() - start
    worst = max(
        abs(float(x[0]) - closed_form_constant_control(1.0, 2.0, float(t)))
        for t, x in zip(traj.times, traj.states)
    )
    final_gap = abs(float(traj.states[-1][0]) - 1.0 / math.sqrt(2.0))
    ok = worst <= 1e-6 and final_gap <= 1e-4 and elapsed < 1.0
    return CriterionResult(
        "bounded-control floor (u=2)",
        ok,
        f"max |x - closed form| = {worst:.2e}, |x(20) - 1/sqrt(2)| = {final_gap:.2e}, "
        f"{elapsed * 1e3:.0f} ms",
    )


def criterion_golden_stabilization() -> CriterionResult:
    """Sampled feedback 2/x^2 at diameter ln(golden mean): exponential node
    decay and per-node contraction, from six starting points."""
    fx = cubic_damped_fixture()
    delta = DELTA_MAX
    horizon = 21 * delta  # exact multiple: every gap equals delta
    partition = uniform_partition(delta, horizon)
    opts = SimOptions(horizon=horizon)
    ratio_bound = math.exp(-delta / 2.0)
    worst_decay = -math.inf
    worst_ratio = -math.inf
    slowest = 0.0
    for z in (0.1, -0.1, 1.0, -1.0, 5.0, -5.0):
        start = time.perf_counter()
        traj = simulate_sample_hold(fx.system, fx.feedback, partition, [z], fx.target, opts)
        slowest = max(slowest, time.perf_counter() - start)
        d = traj.distances(fx.target)
        envelope = abs(z) * np.exp(-traj.times / 2.0)
        worst_decay = max(worst_decay, float(np.max(d - envelope)))
        ratios = d[1:] / d[:-1]
        worst_ratio = max(worst_ratio, float(np.max(ratios)))
    ok = worst_decay <= 1e-6 and worst_ratio <= ratio_bound + 1e-6 and slowest < 1.0
    return CriterionResult(
        "golden-ratio sample-and-hold decay",
        ok,
        f"max excess over |z|e^(-t/2) = {worst_decay:.2e}, max node ratio "
        f"{worst_ratio:.8f} vs bound {ratio_bound:.8f}, slowest run {slowest * 1e3:.0f} ms",
    )


def criterion_impulsive_jump() -> CriterionResult:
    """Pure fast motion (w0, w) = (0, 1) matches 1/sqrt(2s + 1) to 1e-6."""
    fx = cubic_damped_fixture()
    checkpoints = np.linspace(0.1, 10.0, 100)
    traj = simulate_sample_hold(
        ExtendedSystem(fx.system),
        Feedback.constant_extended(0.0, [1.0]),
        uniform_partition(1.0, 10.0),
        [1.0],
        fx.target,
        SimOptions(horizon=10.0),
        record_times=checkpoints,
    )
    worst = max(
        abs(fx.target.distance(x) - closed_form_jump(1.0, float(t)))
        for t, x in zip(traj.times, traj.states)
    )
    ok = worst <= 1e-6
    return CriterionResult(
        "impulsive jump oracle", ok, f"max |d(y(s)) - 1/sqrt(2s+1)| = {worst:.2e}"
    )


def criterion_clf_certification(outdir: Path) -> CriterionResult:
    """CLI certification: the certified decrease rate passes (exit 0), the
    cubic decrease rate fails at every sampled point (exit 2)."""
    import json

    good_dir = outdir / "clf-good"
    bad_dir = outdir / "clf-bad"
    base = [
        "verify-clf",
        "--set",
        'system="cubic-damped"',
        "--set",
        'clf.W={"name": "norm"}',
        "--set",
        'clf.region={"r_min": 1e-2, "r_max": 1e2, "samples": 41}',
    ]
    code_good = cli.main(
        base + ["--set", 'clf.gamma={"name": "example"}', "--output", str(good_dir)]
    )
    code_bad = cli.main(
        base + ["--set", 'clf.gamma={"name": "power", "exponent": 3}', "--output", str(bad_dir)]
    )
    bad_report = json.loads((bad_dir / "certification.json").read_text())
    all_points = len(bad_report["violations"]) == bad_report["checked"] > 0
    ok = code_good == 0 and code_bad == 2 and all_points
    return CriterionResult(
        "CLF certification exit codes",
        ok,
        f"good gamma exit {code_good}, cubic gamma exit {code_bad} with "
        f"{len(bad_report['violations'])}/{bad_report['checked']} violations",
    )


def criterion_hamiltonian_equivalence() -> CriterionResult:
    """Truncated-cone Hamiltonian approaches the simplex Hamiltonian at the
    rate 2/(1 + R_max) at the benchmark point (x, p) = (1, 1)."""
    fx = cubic_damped_fixture()
    directions = np.array([[1.0]])
    grid = ExtendedControlGrid.build(directions, mesh=1e-3)
    h_ext = hamiltonian_extended(fx.system, [1.0], [1.0], grid)
    gaps = []
    ok = abs(h_ext - (-1.0)) <= 1e-9
    for r_max in (10.0, 100.0, 1000.0):
        og = OriginalControlGrid.build(directions, r_max=r_max, r_min=1e-3)
        h_orig = hamiltonian_original(fx.system, [1.0], [1.0], og)
        gap = abs(h_orig - h_ext)
        gaps.append(gap)
        ok = ok and gap <= 2.0 / (1.0 + r_max) + 1e-3
    return CriterionResult(
        "Hamiltonian equivalence",
        ok,
        f"H_ext = {h_ext}, gaps at R_max 10/100/1000: "
        + ", ".join(f"{g:.2e}" for g in gaps),
    )


def criterion_synthesis_pipeline() -> CriterionResult:
    """Synthesized feedback reproduces 2/x^2 within 5 percent on [0.1, 10];
    lift/project round trip is exact to 1e-10."""
    fx = cubic_damped_fixture()
    cand = _fixture_candidate(fx)
    grid = ExtendedControlGrid.build(np.array([[1.0]]), mesh=1e-3)
    _, projected = synthesized_feedbacks(fx.system, cand, fx.n_floor, grid)
    worst_rel = 0.0
    for x in np.geomspace(0.1, 10.0, 40):
        u = projected.fn(np.array([x]))
        expected = 2.0 / x**2
        worst_rel = max(worst_rel, abs(float(u[0]) - expected) / expected)
    worst_round = 0.0
    g = fx.system.growth
    for u in np.geomspace(1e-3, 1e3, 25):
        back = project_feedback(g, control_to_extended(g, [u]))
        worst_round = max(worst_round, abs(float(back[0]) - u) / max(u, 1.0))
    ok = worst_rel <= 0.05 and worst_round <= 1e-10
    return CriterionResult(
        "synthesis pipeline",
        ok,
        f"max rel gap to 2/x^2 = {worst_rel:.2e}, lift/project round trip "
        f"{worst_round:.2e}",
    )


def _random_piecewise_record(rng) -> TrajectoryRecord:
    pieces = int(rng.integers(1, 7))
    gaps = rng.uniform(0.05, 2.0, size=pieces)
    times = np.concatenate(([0.0], np.cumsum(gaps)))
    controls = rng.uniform(0.0, 20.0, size=(pieces, 1))
    states = np.zeros((pieces + 1, 1))
    return TrajectoryRecord(
        times=times,
        states=states,
        controls=controls,
        control_kind="original",
        status=TerminationStatus.HORIZON_END,
        status_time=float(times[-1]),
    )


def criterion_transform_round_trips() -> CriterionResult:
    """Time-change, control-map, and conjugacy identities at 1e-10."""
    from .core import GrowthRate

    rng = np.random.default_rng(7)
    worst_time = 0.0
    for _ in range(1000):
        g = GrowthRate(degree=int(rng.integers(1, 4)))
        rec = _random_piecewise_record(rng)
        back = time_change_backward(time_change_forward(rec, g), g)
        worst_time = max(worst_time, float(np.max(np.abs(back.times - rec.times))))

    worst_map = 0.0
    for _ in range(1000):
        g = GrowthRate(degree=int(rng.integers(1, 4)))
        u = np.array([rng.uniform(0.0, 50.0)])
        back = extended_to_control(g, control_to_extended(g, u))
        worst_map = max(worst_map, float(np.max(np.abs(back - u))) / max(float(u[0]), 1.0))

    fx = cubic_damped_fixture()
    worst_conj = 0.0
    for _ in range(10000):
        x = np.array([rng.uniform(0.1, 3.0) * rng.choice([-1.0, 1.0])])
        u = np.array([rng.uniform(0.0, 30.0)])
        lhs = rescaled_dynamics(fx.system, x, u)
        rhs = extended_dynamics(fx.system, x, control_to_extended(fx.system.growth, u))
        worst_conj = max(
            worst_conj, float(np.max(np.abs(lhs - rhs))) / max(1.0, float(np.max(np.abs(lhs))))
        )
    ok = worst_time <= 1e-10 and worst_map <= 1e-10 and worst_conj <= 1e-10
    return CriterionResult(
        "transform round trips",
        ok,
        f"time-change {worst_time:.2e}, control maps {worst_map:.2e}, "
        f"conjugacy {worst_conj:.2e}",
    )


def criterion_kl_machinery() -> CriterionResult:
    """Strip ladder, descent times, majorant domination, axiom checks."""
    beta = KLFunction.exponential(scale=2.0, rate=0.5)
    strips = strip_radii(beta, -3, 3)
    expected = np.array([8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.125])
    radii_gap = float(np.max(np.abs(strips.radii - expected)))

    dwell = descent_times(beta, strips)
    dwell_gap = float(np.max(np.abs(dwell.values - 2.0 * math.log(4.0))))

    b = piecewise_b(strips, dwell)
    majorant = kl_majorant(b)
    rng = np.random.default_rng(11)
    checked = 0
    dominated = True
    while checked < 1000:
        R = math.exp(rng.uniform(math.log(0.13), math.log(7.9)))
        t = rng.uniform(0.0, 8.0)
        try:
            bv = b.value(R, t)
        except SampleStabError:
            continue
        checked += 1
        if majorant(R, t) < bv:
            dominated = False
    plain = KLFunction.exponential(scale=1.0, rate=0.5)
    plain_ok = kl_check(plain, np.geomspace(0.01, 10, 9), np.linspace(0, 8, 9)).ok
    constant = KLFunction(fn=lambda r, t: r, strict_at_zero=False)
    const_report = kl_check(constant, np.geomspace(0.01, 10, 9), np.linspace(0, 8, 9))
    flags_constant = any(v.kind == "decreasing-in-t" for v in const_report.violations)

    ok = (
        radii_gap <= 1e-10
        and dwell_gap <= 1e-8
        and dominated
        and plain_ok
        and flags_constant
    )
    return CriterionResult(
        "KL machinery",
        ok,
        f"radii gap {radii_gap:.2e}, dwell gap {dwell_gap:.2e}, domination at "
        f"{checked} points: {dominated}, axiom checks {plain_ok}/{flags_constant}",
    )


def criterion_negative_certification() -> CriterionResult:
    """Bounded feedback u = 2 cannot reach below 1/sqrt(2): the certifier
    must produce violations for the pair (R, r) = (2, 0.1)."""
    fx = cubic_damped_fixture()
    report = certify_sample_stabilizability(
        fx.system,
        Feedback.constant([2.0]),
        fx.beta,
        [(2.0, 0.1)],
        delta=lambda R, r: DELTA_MAX,
        seeds=default_seed_states(1),
        opts=SimOptions(horizon=12.0),
        target=fx.target,
    )
    n_viol = len(report.pairs[0].violations)
    ok = report.verdict == "violations" and n_viol > 0
    return CriterionResult(
        "negative certification (u=2)", ok, f"verdict {report.verdict}, {n_viol} violations"
    )


def criterion_determinism(outdir: Path) -> CriterionResult:
    """Identical config and seed produce byte-identical CSV and JSON."""
    args_common = [
        "simulate",
        "--set",
        'system="cubic-damped"',
        "--set",
        "simulate.z=[1.0]",
        "--set",
        'simulate.feedback={"name": "example-K"}',
        "--set",
        'simulate.partition={"golden": true}',
        "--set",
        "simulate.horizon=8.0",
        "--set",
        "simulate.record_dt=0.25",
        "--set",
        "seed=3",
    ]
    dirs = [outdir / "det-a", outdir / "det-b"]
    for d in dirs:
        code = cli.main(args_common + ["--output", str(d)])
        if code != 0:
            return CriterionResult("determinism", False, f"simulate exited {code}")
    csv_a = (dirs[0] / "trajectory.csv").read_bytes()
    csv_b = (dirs[1] / "trajectory.csv").read_bytes()

    cert_args = [
        "certify-stab",
        "--set",
        'system="cubic-damped"',
        "--set",
        'certify.beta={"name": "example"}',
        "--set",
        "certify.pairs=[[2.0, 0.1]]",
        "--set",
        "certify.horizon=6.0",
        "--set",
        "seed=3",
    ]
    for d in dirs:
        cli.main(cert_args + ["--output", str(d)])
    json_a = (dirs[0] / "stability.json").read_bytes()
    json_b = (dirs[1] / "stability.json").read_bytes()
    ok = csv_a == csv_b and json_a == json_b
    return CriterionResult(
        "determinism",
        ok,
        f"CSV identical: {csv_a == csv_b}, JSON identical: {json_a == json_b}",
    )


def run_all(outdir: Path, emit: Optional[Callable[[str], None]] = print) -> List[CriterionResult]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    criteria = [
        criterion_bounded_control_floor,
        criterion_golden_stabilization,
        criterion_impulsive_jump,
        lambda: criterion_clf_certification(outdir),
        criterion_hamiltonian_equivalence,
        criterion_synthesis_pipeline,
        criterion_transform_round_trips,
        criterion_kl_machinery,
        criterion_negative_certification,
        lambda: criterion_determinism(outdir),
    ]
    results = []
    for i, fn in enumerate(criteria, start=1):
        result = fn()
        results.append(result)
        if emit:
            tag = "PASS" if result.passed else "FAIL"
            emit(f"[{tag}] criterion {i}: {result.name} -- {result.detail}")
    return results

"""Command-line front end.

Commands: simulate | verify-clf | synthesize | certify-stab | example.
Exit codes: 0 success/certified, 1 usage or config error, 2 verification
violations, 3 runtime failure.  Outputs (CSV, JSON, optional SVG) are
byte-deterministic given identical config and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .clf import (
    ExtendedControlGrid,
    cone_directions,
    compute_N_curve,
    decrease_check,
    project_feedback,
    radial_states,
    synthesize_detail,
)
from .config import load_config, require
from .core import TerminationStatus
from .errors import (
    CertificationError,
    ConfigError,
    DomainError,
    SampleStabError,
)
from .gac import certify_sample_stabilizability
from .sampling import (
    SimOptions,
    simulate_open_loop,
    simulate_sample_hold,
    trajectory_to_csv,
    uniform_partition,
)
from .transforms import ExtendedSystem, RescaledSystem

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATIONS = 2
EXIT_RUNTIME = 3

_PALETTE = ("#1f6fb4", "#c0392b", "#2c8a4b", "#8e44ad")


def _svg_polyline_plot(series, path: Path, title: str) -> None:
    """Minimal static SVG: one polyline per series plus axes and labels."""
    width, height, margin = 640.0, 400.0, 55.0
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(v):
        return margin + (v - x_lo) / x_span * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / y_span * (height - 2 * margin)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin:.1f}" y1="{height - margin:.1f}" x2="{width - margin:.1f}" '
        f'y2="{height - margin:.1f}" stroke="black"/>',
        f'<line x1="{margin:.1f}" y1="{margin:.1f}" x2="{margin:.1f}" '
        f'y2="{height - margin:.1f}" stroke="black"/>',
        f'<text x="{margin:.1f}" y="{height - margin + 16:.1f}" font-size="11">{x_lo:.4g}</text>',
        f'<text x="{width - margin:.1f}" y="{height - margin + 16:.1f}" text-anchor="end" '
        f'font-size="11">{x_hi:.4g}</text>',
        f'<text x="{margin - 6:.1f}" y="{height - margin:.1f}" text-anchor="end" '
        f'font-size="11">{y_lo:.4g}</text>',
        f'<text x="{margin - 6:.1f}" y="{margin + 4:.1f}" text-anchor="end" '
        f'font-size="11">{y_hi:.4g}</text>',
    ]
    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(f"{sx(float(x)):.3f},{sy(float(y)):.3f}" for x, y in zip(xs, ys))
        lines.append(f'<polyline points="{points}" fill="none" stroke="{color}"/>')
        lines.append(
            f'<text x="{width - margin:.1f}" y="{margin + 16 * (i + 1):.1f}" '
            f'text-anchor="end" font-size="11" fill="{color}">{label}</text>'
        )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sim_options(block: dict, horizon: float) -> SimOptions:
    opts = block.get("options", {}) if block else {}
    return SimOptions(
        target_tol=float(opts.get("target_tol", 1e-8)),
        blowup_norm=float(opts.get("blowup_norm", 1e9)),
        min_step=float(opts.get("min_step", 1e-12)),
        horizon=float(horizon),
        integrator_rel_tol=float(opts.get("rel_tol", 1e-10)),
        integrator_abs_tol=float(opts.get("abs_tol", 1e-12)),
    )


def _wrap_mode(system, mode: str):
    if mode == "original":
        return system
    if mode == "rescaled":
        return RescaledSystem(system)
    if mode == "extended":
        return ExtendedSystem(system)
    raise ConfigError(f"unknown mode '{mode}'")


def cmd_simulate(cfg: dict, outdir: Path, plot: bool) -> int:
    system, target = catalog.build_system(require(cfg, "system", "simulate"))
    block = require(cfg, "simulate", "simulate")
    mode = cfg.get("mode", "original")
    horizon = float(block.get("horizon", 10.0))
    opts = _sim_options(block, horizon)
    z = np.asarray(require(block, "z", "simulate"), dtype=float)

    record_dt = block.get("record_dt")
    record_times = None
    if record_dt is not None:
        dt = float(record_dt)
        if dt <= 0:
            raise ConfigError("record_dt must be positive")
        record_times = np.arange(dt, horizon + dt / 2, dt)

    wrapped = _wrap_mode(system, mode)
    has_feedback = "feedback" in block
    has_signal = "signal" in block
    if has_feedback == has_signal:
        raise ConfigError("simulate needs exactly one of 'feedback' or 'signal'")
    if has_feedback:
        feedback = catalog.build_feedback(block["feedback"], system)
        delta = catalog.resolve_delta(block.get("partition", {"golden": True}))
        partition = uniform_partition(delta, horizon)
        record = simulate_sample_hold(
            wrapped, feedback, partition, z, target, opts, record_times
        )
    else:
        signal = catalog.build_signal(block["signal"])
        record = simulate_open_loop(wrapped, signal, z, target, opts, record_times)

    out_csv = outdir / cfg.get("output", {}).get("trajectory", "trajectory.csv")
    with open(out_csv, "w", encoding="utf-8") as fh:
        trajectory_to_csv(record, target, fh)

    if plot:
        distances = record.distances(target)
        series = [("d(x(t))", record.times, distances)]
        plot_cfg = block.get("plot", {})
        if "beta" in plot_cfg:
            beta = catalog.build_beta(plot_cfg["beta"])
            d0 = target.distance(record.states[0])
            series.append(
                ("beta envelope", record.times, [beta(d0, float(t)) for t in record.times])
            )
        out_svg = outdir / cfg.get("output", {}).get("plot", "trajectory.svg")
        _svg_polyline_plot(series, out_svg, title="distance to target")

    if record.status == TerminationStatus.BLOW_UP and block.get("fail_on_blowup"):
        return EXIT_RUNTIME
    return EXIT_OK


def _clf_ingredients(cfg: dict, command: str, seed: int):
    system, target = catalog.build_system(require(cfg, "system", command))
    clf_cfg = require(cfg, "clf", command)
    candidate = catalog.build_candidate(
        require(clf_cfg, "W", command), require(clf_cfg, "gamma", command)
    )
    grid_cfg = clf_cfg.get("grid", {})
    directions = cone_directions(
        system, count=int(grid_cfg.get("directions", 16)), seed=seed
    )
    grid = ExtendedControlGrid.build(directions, mesh=float(grid_cfg.get("mesh", 1e-3)))
    return system, target, clf_cfg, candidate, grid


def cmd_verify_clf(cfg: dict, outdir: Path) -> int:
    seed = int(cfg.get("seed", 0))
    system, _, clf_cfg, candidate, grid = _clf_ingredients(cfg, "verify-clf", seed)
    region = clf_cfg.get("region", {})
    r_min = float(region.get("r_min", 1e-2))
    r_max = float(region.get("r_max", 1e2))
    samples = int(region.get("samples", 41))
    states = radial_states(system.n, r_min, r_max, samples, log=bool(region.get("log", True)))
    report = decrease_check(
        system, candidate, states, grid, region_label=f"annulus[{r_min},{r_max}]"
    )

    n_curve = None
    if report.ok and "n_curve" in clf_cfg:
        curve_cfg = clf_cfg["n_curve"]
        band_samples = int(curve_cfg.get("band_samples", 40))

        def level_builder(lo, hi):
            return radial_states(system.n, lo, hi, band_samples, log=False)

        n_curve = compute_N_curve(
            system, candidate, curve_cfg.get("r_values", [0.5, 1.0, 2.0]), grid, level_builder
        )
        report = type(report)(
            region=report.region,
            mesh=report.mesh,
            checked=report.checked,
            worst_margin=report.worst_margin,
            violations=report.violations,
            n_curve=n_curve,
        )

    out = outdir / cfg.get("output", {}).get("report", "certification.json")
    _write_json(report.to_dict(), out)
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def cmd_synthesize(cfg: dict, outdir: Path) -> int:
    seed = int(cfg.get("seed", 0))
    system, _, _, candidate, _ = _clf_ingredients(cfg, "synthesize", seed)
    syn_cfg = require(cfg, "synthesize", "synthesize")
    grid_cfg = syn_cfg.get("grid", {})
    directions = cone_directions(system, count=int(grid_cfg.get("directions", 16)), seed=seed)
    grid = ExtendedControlGrid.build(directions, mesh=float(grid_cfg.get("mesh", 1e-3)))
    n_func = catalog.build_n_func(syn_cfg.get("N", {"name": "example"}))

    x_cfg = syn_cfg.get("x_grid", {})
    lo = float(x_cfg.get("min", 0.1))
    hi = float(x_cfg.get("max", 10.0))
    count = int(x_cfg.get("count", 25))
    if not 0 < lo <= hi or count < 1:
        raise ConfigError("x_grid needs 0 < min <= max and count >= 1")
    if count == 1 or lo == hi:
        xs = np.array([lo])
    elif x_cfg.get("log", True):
        xs = np.geomspace(lo, hi, count)
    else:
        xs = np.linspace(lo, hi, count)

    axis = np.zeros(system.n)
    axis[0] = 1.0
    rows = []
    failures = 0
    for r in xs:
        x = r * axis
        wc, value, threshold = synthesize_detail(system, candidate, n_func, x, grid)
        margin = value - threshold
        if not value < threshold:
            failures += 1
        if wc.w_norm == 0.0:
            u = np.zeros(system.m)
        else:
            u = project_feedback(system.growth, wc)
        rows.append((x, wc, u, margin))

    out = outdir / cfg.get("output", {}).get("table", "synthesis.csv")
    with open(out, "w", encoding="utf-8") as fh:
        header = (
            [f"x_{i}" for i in range(1, system.n + 1)]
            + ["w0"]
            + [f"w_{j}" for j in range(1, system.m + 1)]
            + [f"u_{j}" for j in range(1, system.m + 1)]
            + ["margin"]
        )
        fh.write(",".join(header) + "\n")
        for x, wc, u, margin in rows:
            cells = [repr(float(v)) for v in x]
            cells.append(repr(float(wc.w0)))
            cells += [repr(float(v)) for v in wc.w]
            cells += [repr(float(v)) for v in u]
            cells.append(repr(float(margin)))
            fh.write(",".join(cells) + "\n")
    return EXIT_VIOLATIONS if failures else EXIT_OK


def cmd_certify_stab(cfg: dict, outdir: Path, jobs: int) -> int:
    system, target = catalog.build_system(require(cfg, "system", "certify-stab"))
    cert_cfg = require(cfg, "certify", "certify-stab")
    beta = catalog.build_beta(require(cert_cfg, "beta", "certify-stab"))
    pairs_raw = require(cert_cfg, "pairs", "certify-stab")
    try:
        pairs = [(float(R), float(r)) for R, r in pairs_raw]
    except (TypeError, ValueError):
        raise ConfigError("certify.pairs must be a list of [R, r] pairs") from None
    feedback_cfg = cfg.get("simulate", {}).get("feedback") or {"name": "example-K"}
    feedback = catalog.build_feedback(feedback_cfg, system)
    delta = catalog.resolve_delta(cert_cfg.get("delta", {"golden": True}))
    horizon = float(cert_cfg.get("horizon", 12.0))
    opts = _sim_options(cert_cfg, horizon)
    fractions = tuple(float(f) for f in cert_cfg.get("fractions", [1.0, 0.75, 0.5]))

    seed = int(cfg.get("seed", 0))
    mag_fractions = cert_cfg.get("seeds", {}).get("magnitude_fractions", [1.0, 0.6, 0.25])

    def sampler(R, rng):
        out = []
        for frac in mag_fractions:
            if system.n == 1:
                out.append(np.array([frac * R]))
                out.append(np.array([-frac * R]))
            else:
                e = rng.normal(size=system.n)
                e /= np.linalg.norm(e)
                out.append(frac * R * e)
                out.append(-frac * R * e)
        return out

    report = certify_sample_stabilizability(
        system,
        feedback,
        beta,
        pairs,
        delta=lambda R, r: delta,
        seeds=sampler,
        opts=opts,
        target=target,
        fractions=fractions,
        seed=seed,
        jobs=max(jobs, 1),
    )
    out = outdir / cfg.get("output", {}).get("report", "stability.json")
    _write_json(report.to_dict(), out)
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def cmd_example(outdir: Path) -> int:
    from .acceptance import run_all

    results = run_all(outdir)
    failed = [r for r in results if not r.passed]
    return EXIT_OK if not failed else EXIT_VIOLATIONS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON run configuration")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry by dotted path (value parsed as JSON)",
    )
    common.add_argument("--jobs", type=int, default=1, help="worker parallelism bound")
    common.add_argument("--output", default="out", help="output directory")

    parser = argparse.ArgumentParser(
        prog="samplestab",
        description="simulate, certify, and synthesize sample-and-hold stabilization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_sim = sub.add_parser("simulate", parents=[common], help="run one trajectory")
    p_sim.add_argument("--plot", action="store_true", help="also write an SVG plot")
    sub.add_parser("verify-clf", parents=[common], help="certify a control Lyapunov function")
    sub.add_parser("synthesize", parents=[common], help="tabulate the synthesized feedback")
    sub.add_parser("certify-stab", parents=[common], help="empirical stabilizability sweep")
    sub.add_parser("example", parents=[common], help="run the built-in acceptance suite")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "example":
            return cmd_example(outdir)
        cfg = load_config(args.config, args.set)
        if args.command == "simulate":
            return cmd_simulate(cfg, outdir, plot=args.plot)
        if args.command == "verify-clf":
            return cmd_verify_clf(cfg, outdir)
        if args.command == "synthesize":
            return cmd_synthesize(cfg, outdir)
        if args.command == "certify-stab":
            return cmd_certify_stab(cfg, outdir, jobs=args.jobs)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"samplestab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"samplestab: invalid request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"samplestab: certification failure: {exc}", file=sys.stderr)
        return EXIT_VIOLATIONS
    except SampleStabError as exc:
        print(f"samplestab: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``gkdv <simulate|picard|regularity|validate> --config PATH``."""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, build_phi, config_dict, format_config, parse_config, validate_config
from .diagnostics import (
    SERIES_COLUMNS,
    admissibility_check,
    annihilating_sign,
    commutator_residuals,
    diagnostic_rows,
    invariant_drift,
    kato_smoothing_norm,
    persistence_monitor,
)
from .dynamics import simulate
from .errors import ConfigError, GKdVError, NonContractionError
from .io import emit_plot_data, inventory, read_snapshot, write_csv, write_json, write_snapshot
from .picard import contraction_time, picard_solve
from .reference import TravelingWaveSpec, cazenave_naumkin_data, traveling_wave, tw_residual
from .regularity import FrontParams, cutoff_properties, make_cutoff, one_sided_data, regularity_experiment
from .spectral import Field, airy_propagate, is_contained, l2_norm, make_grid, outer_mass_fraction

log = logging.getLogger(__name__)

INVARIANT_COLUMNS = ("t", "I1", "I2", "I3")
WEIGHTED_COLUMNS = ("t", "winf", "wl2_1", "wl2_2", "wl2_3", "wl2_4", "lower", "hs")
PERSISTENCE_COLUMNS = ("t", "deviation", "lambda_half")


def initial_data(cfg, grid=None):
    """Build u0 from the ``data.*`` section."""
    grid = grid or cfg.grid()
    params = cfg.model_params()
    if cfg.data == "cazenave_naumkin":
        phi = build_phi(cfg.phi, grid, cfg.data_lambda, cfg.m, cfg.seed)
        return cazenave_naumkin_data(cfg.data_lambda, cfg.theta, grid, cfg.m, phi)
    if cfg.data == "traveling_wave":
        return traveling_wave(TravelingWaveSpec(cfg.c, cfg.alpha, cfg.constant_mode), grid)
    if cfg.data == "one_sided":
        return one_sided_data(cfg.x0, cfg.data_s, cfg.data_l, grid, params, c_k=cfg.c_k, theta=cfg.theta)
    f, _ = read_snapshot(cfg.path)
    if f.grid != grid:
        raise ConfigError(f"snapshot grid (n={f.grid.n}, L={f.grid.L}) differs from the configured grid")
    return f


def _series_files(out, rows, lam):
    cols = {name: i for i, name in enumerate(SERIES_COLUMNS)}
    write_csv(out / "diagnostics.csv", SERIES_COLUMNS, rows)
    files = {}
    for family, names in (("invariants", INVARIANT_COLUMNS), ("weighted", WEIGHTED_COLUMNS)):
        files[family] = write_csv(out / f"{family}.csv", names, [[r[cols[c]] for c in names] for r in rows])
    files["persistence"] = write_csv(
        out / "persistence.csv", PERSISTENCE_COLUMNS,
        [(r[cols["t"]], r[cols["deviation_from_u0"]], lam / 2.0) for r in rows],
    )
    return files


def _write_snapshots(out, traj):
    for i in (0, len(traj.times) - 1):
        write_snapshot(out / "snapshots" / f"u_{i:05d}.bin", traj.slice(i), traj.times[i])


def _peak_error(u, grid, target):
    """Periodic distance between the grid argmax of |u| and ``target``."""
    xp = grid.x[int(np.argmax(np.abs(u.values)))]
    return float(abs(np.mod(xp - target + grid.L, 2.0 * grid.L) - grid.L))


def _traveling_wave_verdicts(cfg, traj):
    grid = traj.grid
    spec = TravelingWaveSpec(cfg.c, cfg.alpha, cfg.constant_mode)
    exact = traveling_wave(spec, grid, traj.T, check_containment=False)
    final = traj.slice(len(traj.times) - 1)
    shape = l2_norm(final - exact) / l2_norm(exact)
    peak = _peak_error(final, grid, spec.c * traj.T)
    return {
        "tw_shape_error": shape,
        "tw_peak_error": peak,
        "tw_peak_error_dx": peak / grid.dx,
        "tw_profile_residual": tw_residual(spec, grid),
        "tw_paper_literal_residual": tw_residual(TravelingWaveSpec(cfg.c, cfg.alpha, "paper_literal"), grid),
        "tw_shape_ok": bool(shape <= 1e-4),
        "tw_peak_ok": bool(peak <= 2.0 * grid.dx),
    }


def run_simulate(cfg, out, manifest):
    params = cfg.model_params()
    u0 = initial_data(cfg)
    traj = simulate(u0, cfg.T, cfg.dt, params, cfg.slice_count, scheme=cfg.scheme)
    rows = diagnostic_rows(traj, u0, params)
    files = _series_files(out, rows, params.lam)
    emit_plot_data(files, out / "plot")
    _write_snapshots(out, traj)
    drift = invariant_drift(traj, params)
    pers = persistence_monitor(traj, u0, params)
    verdicts = {
        "drift_I1": drift.I1,
        "drift_I2": drift.I2,
        "drift_I3": drift.I3,
        "persistence_holds": pers.holds,
        "max_deviation": float(np.max(pers.deviation)),
        "min_lower": float(np.min(pers.lower)),
        "lower_bound_alerts": traj.meta["lower_bound_alerts"],
    }
    if cfg.data == "traveling_wave":
        verdicts.update(_traveling_wave_verdicts(cfg, traj))
    manifest["verdicts"].update(verdicts)
    manifest["flags"].update({
        "domain_truncation_contaminated": traj.meta["domain_truncation_contaminated"],
        "max_outer_mass_fraction": traj.meta["max_outer_mass_fraction"],
    })
    return 0


def run_picard(cfg, out, manifest):
    params = cfg.model_params()
    u0 = initial_data(cfg)
    kwargs = {"max_iter": cfg.max_iter, "rtol": cfg.rtol}
    try:
        if cfg.auto_T:
            T, traj, rep = contraction_time(u0, params, slice_count=cfg.slice_count, **kwargs)
        else:
            traj, rep = picard_solve(u0, cfg.T, params, cfg.slice_count, **kwargs)
            T = cfg.T
    except NonContractionError as exc:
        report = exc.report.as_dict() if exc.report is not None else {}
        write_json(out / "contraction.json", {"status": "non-contraction", "message": str(exc), **report})
        manifest["verdicts"]["contraction"] = False
        raise
    write_json(out / "contraction.json", {"status": "converged" if rep.converged else "max_iter", **rep.as_dict()})
    rows = diagnostic_rows(traj, u0, params)
    files = _series_files(out, rows, params.lam)
    emit_plot_data(files, out / "plot")
    _write_snapshots(out, traj)
    pers = persistence_monitor(traj, u0, params)
    manifest["verdicts"].update({
        "contraction": rep.converged,
        "accepted_T": T,
        "iterations": rep.iterations,
        "median_ratio": rep.median_ratio,
        "in_ball": rep.in_ball,
        "persistence_holds": pers.holds,
        "xt_norm": rep.final_norm.total,
    })
    manifest["flags"]["domain_truncation_contaminated"] = not all(
        is_contained(traj.slice(i)) for i in range(len(traj.times))
    )
    return 0


def run_regularity(cfg, out, manifest):
    params = cfg.model_params()
    front = FrontParams(cfg.x0, cfg.v, cfg.eps_prime, cfg.R, l=cfg.data_l)
    report, traj = regularity_experiment(
        front, params, cfg.T, cfg.dt, grid=cfg.grid(), proxy_s=cfg.data_s,
        slice_count=cfg.slice_count, c_k=cfg.c_k,
    )
    write_json(out / "regularity.json", report)
    orders = report["orders"]
    header = ("t", *(f"E{o}" for o in orders))
    rows = [
        (t, *(report["windowed"][str(o)]["windowed_series"][i] for o in orders))
        for i, t in enumerate(report["times"])
    ]
    win_file = write_csv(out / "windowed.csv", header, rows)
    emit_plot_data({"windowed": win_file}, out / "plot")
    _write_snapshots(out, traj)
    manifest["verdicts"].update({
        **{f"c_star_{o}": report["windowed"][str(o)]["c_star"] for o in orders},
        **{f"contrast_{o}": report["windowed"][str(o)]["contrast"] for o in orders},
        "contrast_ok": all(report["windowed"][str(o)]["contrast"] >= 10.0 for o in orders),
        "c_star_star": report["c_star_star"],
        "c_star_star_finite": bool(np.isfinite(report["c_star_star"])),
    })
    manifest["flags"]["domain_truncation_contaminated"] = report["domain_truncation_contaminated"]
    return 0


def validate_suite(cfg, seed=0):
    """Fast self-checks of the core identities; returns {name: (passed, value)}.

    Entries whose name starts with ``info_`` are recorded but do not gate the exit status.
    """
    rng = np.random.default_rng(seed)
    grid = cfg.grid()
    results = {}

    band = np.abs(grid.k) < grid.k_max / 2
    worst_u, worst_g = 0.0, 0.0
    for _ in range(10):
        c = (rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)) * band
        f = Field(grid, np.fft.ifft(c), False)
        for t in (0.1, 1.0, 10.0):
            worst_u = max(worst_u, abs(l2_norm(airy_propagate(f, t)) / l2_norm(f) - 1.0))
            lhs = airy_propagate(airy_propagate(f, t), 0.5 * t).values
            rhs = airy_propagate(f, 1.5 * t).values
            worst_g = max(worst_g, float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)))
    results["airy_unitarity"] = (worst_u <= 1e-12, worst_u)
    results["airy_group_law"] = (worst_g <= 1e-11, worst_g)

    # The Airy tail of a Gaussian at t = 0.5 reaches |x| ~ 100, so the identity is checked on a wider box.
    wide = make_grid(2048, 64.0 * np.pi)
    gauss = Field(wide, np.exp(-wide.x**2), True)
    r = commutator_residuals(gauss, 0.5)
    sign = annihilating_sign(gauss, 0.5)
    results["commutator_residual"] = (r[sign] <= 1e-6, r[sign])
    results["commutator_discrimination"] = (r[-sign] >= 1e3 * r[sign], r[-sign] / max(r[sign], 1e-300))

    k1 = kato_smoothing_norm(gauss, 1.0, 256)
    bound = l2_norm(gauss) / np.sqrt(3.0)
    results["kato_bound"] = (k1 <= 1.05 * bound, k1 / bound)

    spec = TravelingWaveSpec(1.0, cfg.alpha, "ode_derived")
    res = tw_residual(spec, grid)
    results["tw_ode_residual"] = (res <= 1e-6, res)
    results["info_tw_paper_literal_residual"] = (True, tw_residual(replace(spec, constant_mode="paper_literal"), grid))

    for e, b in ((0.1, 1.0), (0.5, 5.0), (0.05, 1.25)):
        p = cutoff_properties(make_cutoff(e, b))
        ok = all(p[k] for k in ("zero_left", "one_right", "nondecreasing", "derivative_support",
                                "plateau_lower_bound", "domination"))
        results[f"cutoff_{e}_{b}"] = (ok, p["domination_constant"])
        results[f"info_cutoff_literal_bound_{e}_{b}"] = (True, p["plateau_min"] / p["literal_bound"])

    params = cfg.model_params()
    u0 = cazenave_naumkin_data(params.lam, 0.0, grid, params.m)
    verdict = admissibility_check(u0, params)
    results["cn_lower_bound"] = (verdict.lambda_ok, verdict.lower)
    results["cn_weighted_l2_diverging"] = (verdict.weighted_l2_diverging, verdict.window_norms[-1])
    results["cn_contained_weight"] = (True, float(outer_mass_fraction(u0.values, grid)))

    echo = parse_config(format_config(cfg), command=cfg.command)
    results["config_round_trip"] = (echo == cfg, 0.0)
    return results


def run_validate(cfg, out, manifest):
    results = validate_suite(cfg, cfg.seed)
    write_json(out / "validate.json", {k: {"passed": p, "value": v} for k, (p, v) in results.items()})
    manifest["verdicts"].update({k: bool(p) for k, (p, _) in results.items()})
    failed = [k for k, (p, _) in results.items() if not p and not k.startswith("info_")]
    if failed:
        raise GKdVError(f"validate suite failed: {', '.join(failed)}")
    return 0


DISPATCH = {
    "simulate": run_simulate,
    "picard": run_picard,
    "regularity": run_regularity,
    "validate": run_validate,
}


def _error_record(exc):
    rec = {"type": type(exc).__name__, "message": str(exc), "exit_code": getattr(exc, "exit_code", 1)}
    for attr in ("line", "time", "last_good_slice"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    return rec


def run(cfg, out=None):
    """Execute one configured run; returns the exit status.  The manifest is always written."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    manifest = {
        "config": config_dict(cfg),
        "config_text": format_config(cfg),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "flags": {},
        "verdicts": {},
        "error": None,
    }
    status = 0
    try:
        manifest["flags"]["grid"] = {"n": cfg.n, "L": cfg.L, "dx": 2.0 * cfg.L / cfg.n}
        status = DISPATCH[cfg.command](cfg, out, manifest)
    except GKdVError as exc:
        status = exc.exit_code
        manifest["error"] = _error_record(exc)
        log.error("%s", exc)
    except Exception as exc:  # unexpected failures still leave a manifest behind
        status = 1
        manifest["error"] = {**_error_record(exc), "traceback": traceback.format_exc()}
        log.error("unexpected error: %s", exc)
    finally:
        manifest["exit_code"] = status
        manifest["wall_clock_seconds"] = time.perf_counter() - start
        manifest["files"] = inventory(out)
        write_json(out / "manifest.json", manifest)
    return status


def load_config(path, command, out=None, seed=None):
    text = Path(path).read_text(encoding="utf-8") if path else f"run.command = {command}\n"
    cfg = parse_config(text, command=command)
    changes = {}
    if out is not None:
        changes["out"] = str(out)
    if seed is not None:
        changes["seed"] = seed
    return validate_config(replace(cfg, **changes)) if changes else cfg


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="gkdv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="config file (optional for validate)")
    p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=_u64, help="seed for randomized data (overrides run.seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.config is None and args.command != "validate":
        print(f"gkdv {args.command}: --config is required", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, args.command, args.out, args.seed)
    except (GKdVError, OSError) as exc:
        print(f"gkdv: config error: {exc}", file=sys.stderr)
        out = Path(args.out or "out")
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", {
            "config": None, "code_version": __version__, "exit_code": 1,
            "error": _error_record(exc) if isinstance(exc, GKdVError) else {"type": type(exc).__name__,
                                                                             "message": str(exc), "exit_code": 1},
            "files": inventory(out),
        })
        return 1
    status = run(cfg)
    print(f"gkdv {cfg.command}: exit {status}; manifest at {Path(cfg.out) / 'manifest.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())

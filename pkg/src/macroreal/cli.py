"""Command-line front end: ``macroreal {wsl,curve,mc,scan,noise}``.

Each run writes ``<command>.csv`` and ``<command>.json`` into ``--out`` (plus
``dataset.bin`` for quantum ``mc`` runs). Exit codes: 0 success, 2 usage or
configuration error, 3 runtime error, 4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classical_model import classical_margin, classical_mc_correlations, classical_v_limit, classical_v_limit_array
from .config import KEYS, RunConfig, load_config, serialize_config, with_overrides
from .dataset_io import save_binary
from .errors import ConfigError, InvariantError, MacrorealError
from .inequality import (
    REQUIRED_KEYS, CorrelationSet, compute_V, exact_set_classical, exact_set_quantum, fit_scaling,
    noise_sigma_v, required_acquisition_time, required_acquisition_time_rates, sweep, verdict,
    wsl_set_classical, wsl_set_quantum,
)
from .quantum_exact import (
    grid_argmax, grid_axes, refine_max, scan_grid, scan_violation_region, wsl_margin_quantum,
    wsl_v_limit_quantum, wsl_v_limit_quantum_array,
)
from .schedule import eight_point
from .trajectory_mc import attach_photon_readout, estimate_correlations, rescale_photon_estimates, simulate_dataset

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_INVARIANT = 0, 2, 3, 4
DEFAULT_SCAN_GRID = 32
SIGMA_NOTE = "a published estimate quotes 6.5 standard deviations after 10 h; the formulas here give about 5.2 at that point"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path: Path, payload: dict) -> Path:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _clean(x):
    """NaN/inf are not valid JSON; report them as null."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# ---------------------------------------------------------------------------
# commands


def _wsl_funcs(model: str):
    if model == "quantum":
        return wsl_v_limit_quantum_array, wsl_margin_quantum
    return classical_v_limit_array, classical_margin


def cmd_wsl(cfg: RunConfig, out: Path) -> dict:
    v_func, m_func = _wsl_funcs(cfg.model)
    header = ("t_ji", "t_kj", "t_lk", "v", "margin")
    summary: dict = {"command": "wsl", "model": cfg.model}
    if cfg.grid == 0:
        d = cfg.delays.as_tuple()
        v = wsl_v_limit_quantum(d) if cfg.model == "quantum" else classical_v_limit(d)
        rows = [(*d, v, float(m_func(*d)))]
        summary.update(v=_clean(v), margin=rows[0][4], delays=list(d))
    else:
        # one row per t_ji slab: the maximum of v over the (t_kj, t_lk) plane
        a, b, c = grid_axes(cfg.grid)
        rows = []
        for i, vals in scan_grid(v_func, cfg.grid):
            vals = np.nan_to_num(vals, nan=-np.inf)
            j, k = np.unravel_index(int(np.argmax(vals)), vals.shape)
            d = (float(a[i]), float(b[j]), float(c[k]))
            rows.append((*d, float(vals[j, k]), float(m_func(*d))))
        best = max(rows, key=lambda r: r[3])
        summary.update(grid=cfg.grid, grid_max_v=best[3], grid_argmax=list(best[:3]))
        if cfg.refine:
            x, val = refine_max(lambda *t: v_func(*t), best[:3])
            summary.update(refined_max_v=_clean(val), refined_argmax=x.tolist())
        idx, mval = grid_argmax(m_func, cfg.grid)
        summary.update(grid_max_margin=mval, grid_argmax_margin=[float(grid_axes(cfg.grid)[n][idx[n]]) for n in range(3)])
    write_csv(out / "wsl.csv", header, rows)
    return summary


def _builder(cfg: RunConfig):
    d = cfg.delays
    if cfg.engine == "closed_form":
        wsl = wsl_set_quantum if cfg.model == "quantum" else wsl_set_classical
        return lambda p: wsl(d, p.coupling_phase)
    if cfg.engine == "exact":
        exact = exact_set_quantum if cfg.model == "quantum" else exact_set_classical
        return lambda p: exact(d, p)
    raise ConfigError("engine: curve needs closed_form or exact")


def _stats_summary(stats, cfg: RunConfig) -> dict:
    rec = stats.to_record()
    rec.update(scaling_window=list(cfg.window), k_sigma=cfg.k_sigma, slope_tol=cfg.slope_tol,
               d_reliable=stats.d_reliable, warnings=stats.warnings)
    return {k: _clean(v) for k, v in rec.items()}


def cmd_curve(cfg: RunConfig, out: Path) -> dict:
    build = _builder(cfg)
    p = cfg.params
    sw = sweep(build, p, cfg.taus, cfg.window)
    write_csv(out / "curve.csv", ("tau_over_tp", "n", "d", "v"),
              [(float(t), float(n), float(d), float(v)) for t, n, d, v in zip(sw.tau_over_tp, sw.n, sw.d, sw.v)])
    stats = compute_V(build(p))
    if sw.fit_n is not None:
        stats.slope_n, stats.slope_d = sw.fit_n.slope, sw.fit_d.slope
    stats.scaling_window = cfg.window
    stats.verdict = verdict(stats, cfg.slope_tol, cfg.k_sigma)
    summary = {"command": "curve", "model": cfg.model, "engine": cfg.engine, "tau_over_tp": cfg.tau_over_tp,
               "delays": list(cfg.delays.as_tuple()), "statistics": _stats_summary(stats, cfg),
               "fit_points": None if sw.fit_n is None else sw.fit_n.points_used}
    if sw.fit_n is None:
        summary["note"] = "fewer than 3 sweep points inside the scaling window; slopes not fitted"
    return summary


def _mc_set(cfg: RunConfig, p, out: Path | None, save: bool) -> tuple[CorrelationSet, dict]:
    sched = eight_point(cfg.delays, p)
    info: dict = {}
    if cfg.model == "classical":
        est = classical_mc_correlations(sched, REQUIRED_KEYS, p, cfg.shots, cfg.seed, resamples=cfg.resamples,
                                        bootstrap_seed=cfg.seed, keep_replicates=True)
        return CorrelationSet.from_estimates(est, "mc"), info
    ds = simulate_dataset(sched, p, cfg.shots, cfg.seed, threads=_THREADS.get("n"))
    readout = cfg.readout()
    if readout is not None:
        ds = attach_photon_readout(ds, readout)
        info["readout"] = {"n_plus": readout.n_plus, "n_minus": readout.n_minus}
    if save and out is not None:
        info["dataset"] = str(save_binary(ds, out / "dataset.bin"))
    est = estimate_correlations(ds, REQUIRED_KEYS, resamples=cfg.resamples, seed=cfg.seed, keep_replicates=True)
    if readout is not None:
        est = rescale_photon_estimates(est, readout)
    return CorrelationSet.from_estimates(est, "mc"), info


def cmd_mc(cfg: RunConfig, out: Path) -> dict:
    if cfg.shots < 2:
        raise ConfigError(f"shots: need >= 2, got {cfg.shots}")
    p = cfg.params
    cs, info = _mc_set(cfg, p, out, save=True)
    write_csv(out / "mc.csv", ("labels", "value", "std_error"),
              [(" ".join(k), cs.values[k], cs.errors[k]) for k in REQUIRED_KEYS])
    stats = compute_V(cs)
    summary = {"command": "mc", "model": cfg.model, "shots": cfg.shots, "seed": cfg.seed, **info}
    taus = cfg.tau_values or ()
    if len(taus) >= 3:
        pts_n, pts_d = [], []
        for x in taus:
            sub, _ = _mc_set(replace(cfg, tau_over_tp=float(x)), p.with_tau(x * p.period), None, save=False)
            s = compute_V(sub)
            pts_n.append((x, s.n))
            pts_d.append((x, s.d))
        stats.slope_n, stats.slope_d = fit_scaling(pts_n).slope, fit_scaling(pts_d).slope
    else:
        summary["note"] = "no tau_values sweep given; slopes not fitted, verdict inconclusive"
    stats.scaling_window = cfg.window
    stats.verdict = verdict(stats, cfg.slope_tol, cfg.k_sigma)
    summary["statistics"] = _stats_summary(stats, cfg)
    return summary


def cmd_scan(cfg: RunConfig, out: Path) -> dict:
    grid = cfg.grid or DEFAULT_SCAN_GRID
    hits = scan_violation_region(grid, cfg.threshold)
    write_csv(out / "scan.csv", ("t_ji", "t_kj", "t_lk", "v"), [(*d.as_tuple(), v) for d, v in hits])
    return {"command": "scan", "grid": grid, "threshold": cfg.threshold, "violating_points": len(hits),
            "fraction": len(hits) / grid**3}


def cmd_noise(cfg: RunConfig, out: Path) -> dict:
    budget = cfg.budget()
    p = cfg.params
    stats = compute_V(exact_set_quantum(cfg.delays, p))
    summary: dict = {"command": "noise", "tau_over_tp": cfg.tau_over_tp, "coupling_phase": p.coupling_phase,
                     "chi_ph": budget.chi_ph, "n": stats.n, "d": stats.d, "v": stats.v}
    if budget.T_total is not None:
        pred = noise_sigma_v(budget, p, stats)
        summary["prediction"] = pred.to_record()
        summary["note"] = SIGMA_NOTE
    rows = []
    for r in (1.0, 3.0, 5.0):
        t_req = required_acquisition_time(p, budget.chi_ph, r)
        rows.append((r, t_req, t_req / 3600))
    summary["t_required_s"] = {str(int(r)): t for r, t, _ in rows}
    if budget.eta is not None and budget.gamma is not None:
        summary["t_required_rates_s"] = {
            str(int(r)): required_acquisition_time_rates(p, budget.eta, budget.gamma, r) for r in (1.0, 3.0, 5.0)
        }
    write_csv(out / "noise.csv", ("r", "t_required_s", "t_required_h"), rows)
    return summary


COMMANDS = {"wsl": cmd_wsl, "curve": cmd_curve, "mc": cmd_mc, "scan": cmd_scan, "noise": cmd_noise}
_THREADS: dict = {}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="macroreal", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="INI configuration file")
        sp.add_argument("--threads", type=int, help="worker threads (overrides MACROREAL_THREADS)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--dump-config", action="store_true", help="also write the effective configuration")
        for key in KEYS:
            sp.add_argument("--" + key.replace("_", "-"), dest="ov_" + key, metavar="VALUE")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {k[3:]: v for k, v in vars(args).items() if k.startswith("ov_") and v is not None}
        cfg = with_overrides(cfg, overrides)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"macroreal: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _THREADS["n"] = args.threads
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, args.out)
        if args.dump_config:
            (args.out / "config.ini").write_text(serialize_config(cfg))
        write_json(args.out / f"{args.command}.json", summary)
    except ConfigError as exc:
        print(f"macroreal: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"macroreal: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (MacrorealError, OSError, ValueError) as exc:
        print(f"macroreal: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

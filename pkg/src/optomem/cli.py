"""Command-line driver: plain-text data products from config files.

Subcommands: map, sweep, trajectory, entangle, meanfield.  Exit codes:
0 success, 2 configuration error, 3 numerical abort, 4 check violation
(--check mode only).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load
from .dynamics import (DEFAULT_DTAU, ModelTier, NonFiniteError, SystemState,
                       integrate)
from .ensemble import (EnsembleAbortError, EnsembleSpec, HistogramSpec,
                       run_ensemble, write_result)
from .gridio import write_table
from .maps import GridSpec, classify_regions, scan_plane, write_map
from .model import CouplingSet, DomainError, coupling_coefficients
from .quantum import meanfield_evolve
from .sync import SweepSchedule, demodulate, sweep_phase_diagram, \
    write_phase_diagram

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

_LABELS = ("x", "y", "q1", "p1", "q2", "p2")
_COV_PAIRS = [(i, j) for i in range(6) for j in range(i, 6)]


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _coupling(cfg: RunConfig, params) -> CouplingSet:
    Q1, Q2 = cfg.placement_point(params)
    return coupling_coefficients(params, Q1, Q2)


# --- map ------------------------------------------------------------------------

def cmd_map(cfg: RunConfig, args) -> int:
    params = cfg.params()
    an = cfg.analysis
    grid = GridSpec(
        q1_range=(an.get("q1_min", 0.25), an.get("q1_max", 0.75)),
        q2_range=(an.get("q2_min", 0.25), an.get("q2_max", 0.75)),
        resolution=an.get("grid", 256))
    cmap = scan_plane(params, grid)
    kwargs = {}
    if "amplitude_scale" in an:
        kwargs["amplitude_scale"] = an["amplitude_scale"]
    if "fraction" in an:
        kwargs["fraction"] = an["fraction"]
    regions = classify_regions(cmap, **kwargs)
    write_map(_out_path(args, "coupling_map.csv"), cmap, regions)

    header = dict(cfg.header(), version=__version__)
    cols, row = [], []
    for name, arr in (("g1", cmap.g1), ("g2", cmap.g2), ("g12", cmap.g12),
                      ("g22", cmap.g22), ("gt", cmap.gt)):
        cols.append(f"max_abs_{name}")
        row.append(np.nanmax(np.abs(arr)))
    for name in regions.fractions:
        cols.append("fraction_" + name.replace("/", "_over_"))
        row.append(regions.fractions[name])
    cols += ["union_fraction", "holes", "threshold"]
    row += [regions.union_fraction, regions.holes, regions.threshold]
    write_table(_out_path(args, "map_summary.csv"), header, cols, [row])

    if args.check and "check_union_fraction" in an:
        tol = an.get("check_tol", 0.01)
        if abs(regions.union_fraction - an["check_union_fraction"]) > tol:
            print(f"check failed: union_fraction "
                  f"{regions.union_fraction:.4f} differs from "
                  f"{an['check_union_fraction']:.4f} by more than {tol}",
                  file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


# --- trajectory -----------------------------------------------------------------

def cmd_trajectory(cfg: RunConfig, args) -> int:
    params = cfg.params()
    coupling = _coupling(cfg, params)
    drive = cfg.drive_spec(params)
    noise = cfg.noise_spec() if cfg.noise else None
    if noise is not None and args.seed is not None:
        from dataclasses import replace
        noise = replace(noise, seed=args.seed)
    dt, t_end = cfg.time_grid(params)
    it = cfg.integration
    period_steps = max(1, round(2.0 * math.pi / (params.omega_bar * dt)))
    stride = it.get("sample_stride", max(1, period_steps // 25))
    state0 = SystemState(q1=it.get("q1_0", 0.0), p1=it.get("p1_0", 0.0),
                         q2=it.get("q2_0", 0.0), p2=it.get("p2_0", 0.0))
    traj = integrate(state0, cfg.tier(), params, coupling, drive=drive,
                     noise=noise, dt=dt, t_end=t_end, sample_stride=stride)
    header = dict(cfg.header(), version=__version__,
                  tier=cfg.tier().name, dt=dt)
    data = np.column_stack([traj.t, traj.q1, traj.p1, traj.q2, traj.p2,
                            traj.a.real, traj.a.imag])
    write_table(_out_path(args, "trajectory.csv"), header,
                ["t", "q1", "p1", "q2", "p2", "re_a", "im_a"], data)

    if cfg.analysis.get("demodulate", False):
        env = demodulate(traj, params.omega_bar,
                         cfg.analysis.get("smoothing_periods", 10.0))
        edata = np.column_stack([env.t, np.abs(env.A1), np.abs(env.A2),
                                 env.theta1, env.theta2,
                                 env.b01.real, env.b02.real])
        write_table(_out_path(args, "envelope.csv"), header,
                    ["t", "abs_A1", "abs_A2", "theta1", "theta2",
                     "b01", "b02"], edata)
    return EXIT_OK


# --- sweep ----------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig, args) -> int:
    params = cfg.params()
    an = cfg.analysis
    lam = params.wavelength
    if "placement_list" in an:
        flat = an["placement_list"]
        if len(flat) % 2:
            raise ConfigError("analysis.placement_list needs Q1,Q2 pairs "
                              "(in wavelength units)")
        placements = [(flat[i] * lam, flat[i + 1] * lam)
                      for i in range(0, len(flat), 2)]
    else:
        placements = [cfg.placement_point(params)]
    deltas = an.get("delta_list")
    drives = an.get("drive_list")
    if not deltas or not drives:
        raise ConfigError("analysis.delta_list and analysis.drive_list "
                          "are required for sweep")
    schedule = SweepSchedule(
        tau_s=an.get("tau_s", 2e6), tau_window=an.get("tau_window", 5e5),
        dtau=cfg.integration.get("dtau", DEFAULT_DTAU),
        samples_per_period=an.get("samples_per_period", 25),
        smoothing_periods=an.get("smoothing_periods", 10.0))
    mode = an.get("drive_mode", "power")
    for tier in cfg.tier_list():
        diagram = sweep_phase_diagram(params, placements, deltas, drives,
                                      tier, schedule, drive_mode=mode,
                                      batch=4 * max(1, args.workers))
        write_phase_diagram(
            _out_path(args, f"sweep_{tier.name.lower()}.csv"), diagram)
    return EXIT_OK


# --- meanfield ------------------------------------------------------------------

def _covariance_rows(t, means, covs, en, du):
    rows = np.empty((len(t), 3 + 6 + len(_COV_PAIRS)))
    rows[:, 0] = t
    rows[:, 1] = en
    rows[:, 2] = du
    rows[:, 3:9] = means
    for k, (i, j) in enumerate(_COV_PAIRS):
        rows[:, 9 + k] = covs[:, i, j]
    cols = ["t", "E_n", "duan"]
    cols += [f"mean_{a}" for a in _LABELS]
    cols += [f"cov_{_LABELS[i]}_{_LABELS[j]}" for i, j in _COV_PAIRS]
    return cols, rows


def cmd_meanfield(cfg: RunConfig, args) -> int:
    params = cfg.params()
    coupling = _coupling(cfg, params)
    drive = cfg.drive_spec(params)
    dt, t_end = cfg.time_grid(params)
    stride = cfg.integration.get("sample_stride", 1)
    res = meanfield_evolve(params, coupling, drive, t_end=t_end, dt=dt,
                           sample_stride=stride, noise=cfg.noise_spec())
    en = np.array([_safe_en(C) for C in res.covs])
    cols, rows = _covariance_rows(res.t, res.means, res.covs, en, res.duan())
    header = dict(cfg.header(), version=__version__)
    write_table(_out_path(args, "meanfield.csv"), header, cols, rows)
    return EXIT_OK


def _safe_en(C):
    from .quantum import NonPhysicalCovariance, logarithmic_negativity
    try:
        return logarithmic_negativity(C)
    except NonPhysicalCovariance:
        return math.nan


# --- entangle -------------------------------------------------------------------

def cmd_entangle(cfg: RunConfig, args) -> int:
    params = cfg.params()
    coupling = _coupling(cfg, params)
    drive = cfg.drive_spec(params)
    noise = cfg.noise_spec()
    en_sec = cfg.ensemble
    if "n" not in en_sec or "sample_tau" not in en_sec:
        raise ConfigError("ensemble.n and ensemble.sample_tau are required")
    wb = params.omega_bar
    dtau = cfg.integration.get("dtau", DEFAULT_DTAU)
    times = np.asarray(en_sec["sample_tau"], dtype=float) / wb
    master_seed = args.seed if args.seed is not None \
        else en_sec.get("master_seed", 0)
    hist = None
    if "hist_extent" in en_sec:
        hist = HistogramSpec(extent=en_sec["hist_extent"],
                             h=en_sec.get("hist_h", 0.05),
                             time_index=en_sec.get("hist_time_index", -1))

    # mean-field oracle on (or finer than) the ensemble grid
    t_end = float(times[-1])
    mf_stride = max(1, round((2.0 * math.pi / dtau) / 50.0))
    mf = meanfield_evolve(params, coupling, drive, t_end=t_end,
                          dt=dtau / wb, sample_stride=mf_stride, noise=noise)
    en_mf_grid = np.array([_safe_en(C) for C in mf.covs])
    en_mf = np.interp(times, mf.t, en_mf_grid, left=0.0)
    cols, rows = _covariance_rows(mf.t, mf.means, mf.covs,
                                  en_mf_grid, mf.duan())
    header = dict(cfg.header(), version=__version__)
    write_table(_out_path(args, "entangle_meanfield.csv"), header,
                cols, rows)

    t1 = cfg.analysis.get("t1", 0.0)
    t2 = cfg.analysis.get("t2", t_end)
    err_cols = [times]
    err_names = ["t"]
    sigmas = {}
    for tier in cfg.tier_list():
        spec = EnsembleSpec(
            n_realizations=en_sec["n"], master_seed=master_seed, tier=tier,
            params=params, coupling=coupling, sample_times=times,
            drive=drive, noise=noise, dt=dtau / wb,
            shard_size=en_sec.get("shard_size", 256), histogram=hist)
        name = tier.name.lower()
        res = run_ensemble(spec, worker_count=max(1, args.workers),
                           checkpoint_path=_out_path(
                               args, f"entangle_{name}.ckpt"))
        write_result(_out_path(args, f"entangle_{name}.csv"), res,
                     extra_header=cfg.header())
        if hist is not None and res.histogram is not None:
            W, cx, cy = res.histogram
            X, Y = np.meshgrid(cx, cy, indexing="ij")
            write_table(_out_path(args, f"histogram_{name}.csv"),
                        dict(header, h=spec.histogram.h),
                        ["u", "v", "density"],
                        np.column_stack([X.ravel(), Y.ravel(), W.ravel()]))
        er = np.abs(res.negativity - en_mf)
        mask = (times >= t1) & (times <= t2)
        if mask.sum() >= 2:
            tm = times[mask]
            sigmas[name] = float(np.trapezoid(er[mask], tm)
                                 / (tm[-1] - tm[0]))
        err_cols += [res.negativity, er]
        err_names += [f"E_n_{name}", f"Er_{name}"]
    err_cols.append(en_mf)
    err_names.append("E_n_meanfield")
    eh = dict(header)
    for name, s in sigmas.items():
        eh[f"sigma_Er_{name}"] = s
    write_table(_out_path(args, "entangle_error.csv"), eh, err_names,
                np.column_stack(err_cols))

    if args.check and "check_sigma_max" in cfg.analysis and sigmas:
        worst = max(sigmas.values())
        if worst > cfg.analysis["check_sigma_max"]:
            print(f"check failed: sigma(Er) = {worst:.4g} exceeds "
                  f"{cfg.analysis['check_sigma_max']:.4g}", file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

_COMMANDS = {"map": cmd_map, "sweep": cmd_sweep, "trajectory": cmd_trajectory,
             "entangle": cmd_entangle, "meanfield": cmd_meanfield}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optomem",
        description="Two-membrane cavity optomechanics simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", dest="overrides", action="append",
                       default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("--check", action="store_true",
                       help="verify thresholds from [analysis] check_* keys")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config, args.overrides)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteError, EnsembleAbortError, DomainError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end for the simulation studies.

Every simulation subcommand takes a mandatory --seed and writes CSV, so any
run can be reproduced byte-for-byte. In --strict mode a nonzero exit code
reports flagged trials.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import codebook as cb
from .beamformers import phase_perturbation_study
from .channel import Scenario, demo_two_path_scenario, trial_rng
from .harness import (
    DEFAULT_PERCENTILES,
    ExperimentConfig,
    ccdf,
    run_experiment,
    tradeoff_table,
    write_ccdf_csv,
    write_tradeoff_csv,
    write_trials_csv,
)
from .music import standard_budget
from .power_iteration import PowerIterConfig, run_noisy, write_trace_csv
from .util import to_db


def _add_ensemble_args(p: argparse.ArgumentParser, default_trials: int):
    p.add_argument("--seed", type=int, required=True, help="master seed (mandatory)")
    p.add_argument("--trials", type=int, default=default_trials)
    p.add_argument("--l", type=int, default=2, help="number of paths")
    p.add_argument("--n-r", type=int, default=4)
    p.add_argument("--n-t", type=int, default=64)
    p.add_argument("--fov", type=float, nargs=2, default=(30.0, 150.0), metavar=("LO", "HI"))
    p.add_argument("--rho-f-db", type=float, default=0.0)
    p.add_argument("--rho-r-db", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="exit nonzero on flagged trials")
    p.add_argument("--out", required=True, help="CCDF CSV output path")
    p.add_argument("--trials-out", help="optional per-trial CSV output path")


def _run_ensemble(args, scheme: str, scheme_params: dict) -> int:
    cfg = ExperimentConfig(
        scheme=scheme,
        n_trials=args.trials,
        master_seed=args.seed,
        l=args.l,
        n_r=args.n_r,
        n_t=args.n_t,
        fov_deg=tuple(args.fov),
        rho_forward_db=args.rho_f_db,
        rho_reverse_db=args.rho_r_db,
        scheme_params=scheme_params,
    )
    records = run_experiment(cfg, n_workers=args.workers)
    write_ccdf_csv(records, args.out)
    with open(str(args.out) + ".config.json", "w") as fh:
        fh.write(cfg.to_json() + "\n")
    if args.trials_out:
        write_trials_csv(records, args.trials_out)
    flagged = sum(1 for r in records if r.flagged)
    losses = [r.loss_db for r in records if not r.flagged]
    print(
        f"{scheme}: {len(records)} trials, median loss "
        f"{np.median(losses):.3f} dB, flagged {flagged}"
    )
    if flagged and args.strict:
        return 1
    return 0


def _cmd_simulate(args) -> int:
    params = {}
    if args.bits:
        params["bits"] = args.bits
    if args.rx_mode:
        params["rx_mode"] = args.rx_mode
    return _run_ensemble(args, args.scheme, params)


def _cmd_power_iter(args) -> int:
    params = {"n_total": args.n_total, "n_noise_avg": args.n_noise_avg}
    code = _run_ensemble(args, "power-iter", params)
    if args.trace_out:
        from .channel import ArrayGeometry, build_channel, sample_scenario

        rng = trial_rng(args.seed, 0)
        scen = sample_scenario(
            rng,
            args.l,
            ArrayGeometry(args.n_r),
            ArrayGeometry(args.n_t),
            tuple(args.fov),
            args.rho_f_db,
            args.rho_r_db,
        )
        h = build_channel(scen)
        cfg = PowerIterConfig(
            n_total=args.n_total,
            n_noise_avg=args.n_noise_avg,
            rho_forward_db=args.rho_f_db,
            rho_reverse_db=args.rho_r_db,
        )
        write_trace_csv(run_noisy(h, cfg, rng), h, args.trace_out)
    return code


def _cmd_music(args) -> int:
    params = {"n_up_cov": args.n_up_cov}
    code = _run_ensemble(args, "music", params)
    if args.pseudospectrum_out:
        from .channel import ArrayGeometry, build_channel, sample_scenario
        from .music import Side, default_grid, pseudospectrum, sample_covariance, simulate_snapshots

        rng = trial_rng(args.seed, 0)
        scen = sample_scenario(
            rng,
            args.l,
            ArrayGeometry(args.n_r),
            ArrayGeometry(args.n_t),
            tuple(args.fov),
            args.rho_f_db,
            args.rho_r_db,
        )
        h = build_channel(scen)
        snaps = simulate_snapshots(h, Side.UPLINK, standard_budget(args.n_up_cov), rng)
        ps = pseudospectrum(sample_covariance(snaps), args.l, scen.tx, default_grid(scen.fov_deg))
        with open(args.pseudospectrum_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["angle_deg", "value"])
            for a, v in zip(ps.grid_deg, ps.values):
                w.writerow([f"{a:.10g}", f"{v:.10g}"])
    return code


def _cmd_sweep_tradeoff(args) -> int:
    cfg = ExperimentConfig(
        scheme="beam-sweep",
        n_trials=args.trials,
        master_seed=args.seed,
        l=args.l,
        n_r=args.n_r,
        n_t=args.n_t,
        fov_deg=tuple(args.fov),
        rho_forward_db=args.rho_f_db,
        rho_reverse_db=args.rho_r_db,
        scheme_params={"n_ue": args.n_ue, "m": args.m, "n_rep": args.n_rep},
    )
    rows = tradeoff_table(cfg, args.sizes, percentiles=args.percentiles, n_workers=args.workers)
    write_tradeoff_csv(rows, args.out)
    print(f"sweep tradeoff over sizes {args.sizes} -> {args.out}")
    return 0


def _cmd_bounds(args) -> int:
    lo = cb._fov_beamspace(tuple(args.fov))
    width = lo[1] - lo[0]
    rows = []
    for size in args.sizes:
        omega0 = width / size
        _, achieved_db = cb.optimize_broad_beam(args.n_t, args.m, omega0)
        rows.append(
            {
                "n_beams": size,
                "parseval_db": cb.parseval_bound(args.n_t, width, size),
                "eig_bound_db": cb.eigenvalue_bound(args.n_t, omega0),
                "achieved_db": achieved_db,
            }
        )
    write_tradeoff_csv(rows, args.out)
    print(f"gain-vs-beams table for m={args.m} -> {args.out}")
    return 0


def _cmd_codebook(args) -> int:
    if args.m == "cpo":
        book = cb.build_cpo_codebook(args.n_t, tuple(args.fov), args.n_beams, side=args.side)
        m_val = None
    else:
        book = cb.build_codebook(args.n_t, tuple(args.fov), args.n_beams, int(args.m))
        m_val = int(args.m)
    with open(args.out, "w") as fh:
        fh.write(cb.codebook_to_json(book, n_t=args.n_t, m=m_val, fov_deg=tuple(args.fov)) + "\n")
    if args.pattern_out:
        beam = book.beams[args.beam_index]
        omegas = np.linspace(-math.pi, math.pi, 2048)
        gains = np.abs(cb.array_factor(beam, omegas)) ** 2
        with open(args.pattern_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "gain_db"])
            for o, g in zip(omegas, gains):
                w.writerow([f"{o:.10g}", f"{float(to_db(max(g, 1e-300))):.10g}"])
    print(f"codebook of {len(book)} beams -> {args.out}")
    return 0


def _cmd_perturb(args) -> int:
    if args.scenario:
        with open(args.scenario) as fh:
            scen = Scenario.from_json(fh.read())
    else:
        scen = demo_two_path_scenario()
    grid = np.arange(0.0, 360.0 + args.step / 2.0, args.step)
    rows = phase_perturbation_study(scen, grid)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase_deg", "loss_rsv_db", "loss_directional_db"])
        for deg, rsv, direc in rows:
            w.writerow([f"{deg:.10g}", f"{rsv:.10g}", f"{direc:.10g}"])
    rsv_losses = [r[1] for r in rows]
    dir_losses = [r[2] for r in rows]
    print(
        f"perturbation sweep: max rsv loss {max(rsv_losses):.2f} dB, "
        f"max directional loss {max(dir_losses):.2f} dB -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwbeam",
        description="Beamforming strategy studies for initial user discovery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="loss CCDF for one scheme")
    _add_ensemble_args(p, default_trials=1000)
    p.add_argument(
        "--scheme",
        required=True,
        choices=["optimal", "egt-rsv", "recursive-phase", "directional"],
    )
    p.add_argument("--bits", type=int, help="quantize phases to 2**bits levels")
    p.add_argument(
        "--rx-mode", choices=["matched_filter", "dominant_direction"], help="directional rx"
    )
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("power-iter", help="noisy power iteration CCDF")
    _add_ensemble_args(p, default_trials=1000)
    p.add_argument("--n-total", type=int, default=256)
    p.add_argument("--n-noise-avg", type=int, default=64)
    p.add_argument("--trace-out", help="single-trial trace CSV")
    p.set_defaults(fn=_cmd_power_iter)

    p = sub.add_parser("music", help="bi-directional direction-learning CCDF")
    _add_ensemble_args(p, default_trials=500)
    p.add_argument("--n-up-cov", type=int, default=96)
    p.add_argument("--pseudospectrum-out", help="single-trial pseudospectrum CSV")
    p.set_defaults(fn=_cmd_music)

    p = sub.add_parser("sweep-tradeoff", help="latency vs loss percentiles table")
    _add_ensemble_args(p, default_trials=1000)
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 24, 32, 40, 48, 56, 64])
    p.add_argument("--n-ue", type=int, default=4)
    p.add_argument("--m", type=int, default=4, choices=[2, 3, 4])
    p.add_argument("--n-rep", type=int, default=1)
    p.add_argument(
        "--percentiles", type=int, nargs="*", default=list(DEFAULT_PERCENTILES)
    )
    p.set_defaults(fn=_cmd_sweep_tradeoff)

    p = sub.add_parser("bounds", help="worst-case gain bounds vs codebook size")
    p.add_argument("--n-t", type=int, default=64)
    p.add_argument("--fov", type=float, nargs=2, default=(30.0, 150.0), metavar=("LO", "HI"))
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 24, 32, 40, 48, 56, 64])
    p.add_argument("--m", type=int, default=4, choices=[2, 3, 4])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("codebook", help="design and export a sweep codebook")
    p.add_argument("--n-t", type=int, default=64)
    p.add_argument("--fov", type=float, nargs=2, default=(30.0, 150.0), metavar=("LO", "HI"))
    p.add_argument("--n-beams", type=int, default=16)
    p.add_argument("--m", default="4", choices=["cpo", "2", "3", "4"])
    p.add_argument("--side", default="MWB")
    p.add_argument("--out", required=True)
    p.add_argument("--pattern-out", help="beam pattern CSV (omega, gain_db)")
    p.add_argument("--beam-index", type=int, default=0)
    p.set_defaults(fn=_cmd_codebook)

    p = sub.add_parser("perturb", help="frozen-beamformer phase sensitivity sweep")
    p.add_argument("--scenario", help="scenario JSON path (default: built-in two-path demo)")
    p.add_argument("--step", type=float, default=1.0, help="phase grid step in degrees")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_perturb)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

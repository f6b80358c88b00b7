"""Monte Carlo experiment engine: runs any cataloged scheme over random
scenario ensembles and aggregates loss-vs-optimal statistics.

Trials use counter-based per-trial random streams keyed by
(master_seed, trial_index), so results are bitwise identical no matter how
they are scheduled across workers. Failed trials are flagged and kept.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import beamformers as bf
from . import codebook as cb
from .channel import ArrayGeometry, build_channel, sample_scenario, trial_rng
from .music import MusicBudget, learn_directions, standard_budget
from .power_iteration import PowerIterConfig, run_noisy
from .util import to_db

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "CcdfCurve",
    "SchemeError",
    "SCHEME_NAMES",
    "run_experiment",
    "ccdf",
    "tradeoff_table",
    "nr_scaling_study",
    "write_trials_csv",
    "write_ccdf_csv",
    "write_tradeoff_csv",
]


class SchemeError(RuntimeError):
    """A scheme failed on one trial; the trial is flagged, never dropped."""


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str
    n_trials: int
    master_seed: int
    l: int = 2
    n_r: int = 4
    n_t: int = 64
    fov_deg: tuple[float, float] = (30.0, 150.0)
    rho_forward_db: float = 0.0
    rho_reverse_db: float = 0.0
    scheme_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick one of {sorted(_SCHEMES)}")

    def to_json(self) -> str:
        doc = {
            "scheme": self.scheme,
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "l": self.l,
            "n_r": self.n_r,
            "n_t": self.n_t,
            "fov_deg": list(self.fov_deg),
            "rho_forward_db": self.rho_forward_db,
            "rho_reverse_db": self.rho_reverse_db,
            "scheme_params": self.scheme_params,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    snr_opt_db: float
    snr_scheme_db: float
    loss_db: float
    latency_samples: int
    scheme_metadata: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def flagged(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class CcdfCurve:
    """Empirical P(loss > x) evaluated at the sorted sample points."""

    losses_db: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.losses_db, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "losses_db", x)
        object.__setattr__(self, "probabilities", p)
        if x.size != p.size or x.size < 1:
            raise ValueError("curve needs equal-length, non-empty arrays")


# ---------------------------------------------------------------------------
# scheme catalog


def _quantize_pair(h, pair, bits, rx_is_matched):
    tx_q = bf.quantize_phases(pair.tx, bits)
    if rx_is_matched:
        rx_q = bf.phase_only_matched_rx(h, tx_q)
    else:
        rx_q = bf.quantize_phases(pair.rx, bits)
    return bf.BeamformerPair(tx=tx_q, rx=rx_q)


def _scheme_optimal(h, scen, params, rng, ctx):
    return bf.optimal_pair(h), 0, {}


def _scheme_egt_rsv(h, scen, params, rng, ctx):
    pair = bf.egt_rsv_pair(h)
    bits = params.get("bits")
    if bits:
        pair = _quantize_pair(h, pair, bits, rx_is_matched=True)
    return pair, 0, {}


def _scheme_recursive_phase(h, scen, params, rng, ctx):
    pair = bf.recursive_phase_pair(h)
    bits = params.get("bits")
    if bits:
        pair = _quantize_pair(h, pair, bits, rx_is_matched=True)
    return pair, 0, {}


def _scheme_directional(h, scen, params, rng, ctx):
    mode = bf.RxMode(params.get("rx_mode", "dominant_direction"))
    pair = bf.dominant_directional_pair(h, rx_mode=mode)
    bits = params.get("bits")
    if bits:
        pair = _quantize_pair(h, pair, bits, rx_is_matched=mode is bf.RxMode.MATCHED_FILTER)
    return pair, 0, {}


def _scheme_power_iter(h, scen, params, rng, ctx):
    cfg = PowerIterConfig(
        n_total=params.get("n_total", 256),
        n_noise_avg=params.get("n_noise_avg", 64),
        rho_forward_db=scen.rho_forward_db,
        rho_reverse_db=scen.rho_reverse_db,
    )
    trace = run_noisy(h, cfg, rng)
    return trace.final_pair, cfg.n_total, {"n_noise_avg": cfg.n_noise_avg, "n_iter": cfg.n_iter}


def _scheme_music(h, scen, params, rng, ctx):
    budget = ctx["budget"]
    est = learn_directions(h, budget, k=len(scen.paths), rng=rng)
    if not est.aod_deg or not est.aoa_deg:
        raise SchemeError("no pseudospectrum peaks found")
    from .channel import steering_vector

    tx = bf.Beamformer(steering_vector(scen.tx, est.aod_deg[0]), bf.Constraint.EQUAL_GAIN)
    rx = bf.Beamformer(steering_vector(scen.rx, est.aoa_deg[0]), bf.Constraint.EQUAL_GAIN)
    meta = {
        "aod_est": list(est.aod_deg),
        "aoa_est": list(est.aoa_deg),
        "shortfall": est.aod_shortfall or est.aoa_shortfall,
    }
    return bf.BeamformerPair(tx=tx, rx=rx), budget.n_total, meta


def _scheme_beam_sweep(h, scen, params, rng, ctx):
    pair, latency = cb.beam_sweep(
        h,
        ctx["mwb_book"],
        ctx["ue_book"],
        rho_db=scen.rho_forward_db,
        n_rep=params.get("n_rep", 1),
        rng=rng,
    )
    return pair, latency, {"n_mwb": len(ctx["mwb_book"]), "n_ue": len(ctx["ue_book"])}


def _prepare_music(cfg):
    n_up_cov = cfg.scheme_params.get("n_up_cov", 96)
    return {"budget": cfg.scheme_params.get("budget") or standard_budget(n_up_cov)}


def _prepare_beam_sweep(cfg):
    params = cfg.scheme_params
    n_mwb = params.get("n_mwb", 16)
    n_ue = params.get("n_ue", min(cfg.n_r, 4))
    m = params.get("m", 4)
    return {
        "mwb_book": cb.build_codebook(cfg.n_t, cfg.fov_deg, n_mwb, m),
        "ue_book": cb.build_cpo_codebook(cfg.n_r, cfg.fov_deg, n_ue),
    }


_SCHEMES = {
    "optimal": (_scheme_optimal, None),
    "egt-rsv": (_scheme_egt_rsv, None),
    "recursive-phase": (_scheme_recursive_phase, None),
    "directional": (_scheme_directional, None),
    "power-iter": (_scheme_power_iter, None),
    "music": (_scheme_music, _prepare_music),
    "beam-sweep": (_scheme_beam_sweep, _prepare_beam_sweep),
}

SCHEME_NAMES = tuple(sorted(_SCHEMES))


# ---------------------------------------------------------------------------
# experiment loop


def _run_one_trial(cfg: ExperimentConfig, context, idx: int) -> TrialRecord:
    rng = trial_rng(cfg.master_seed, idx)
    scen = sample_scenario(
        rng,
        cfg.l,
        ArrayGeometry(cfg.n_r),
        ArrayGeometry(cfg.n_t),
        cfg.fov_deg,
        cfg.rho_forward_db,
        cfg.rho_reverse_db,
    )
    h = build_channel(scen)
    opt = bf.optimal_pair(h)
    snr_opt = bf.received_snr(h, opt, scen.rho_forward_db)
    run, _ = _SCHEMES[cfg.scheme]
    try:
        pair, latency, meta = run(h, scen, cfg.scheme_params, rng, context)
        snr = bf.received_snr(h, pair, scen.rho_forward_db)
    except SchemeError as exc:
        return TrialRecord(
            trial_index=idx,
            snr_opt_db=float(to_db(snr_opt)),
            snr_scheme_db=math.nan,
            loss_db=math.nan,
            latency_samples=0,
            scheme_metadata={},
            error=str(exc),
        )
    return TrialRecord(
        trial_index=idx,
        snr_opt_db=float(to_db(snr_opt)),
        snr_scheme_db=float(to_db(snr)),
        loss_db=float(to_db(snr_opt) - to_db(snr)),
        latency_samples=latency,
        scheme_metadata=meta,
    )


def _run_chunk(cfg: ExperimentConfig, context, indices) -> list[TrialRecord]:
    return [_run_one_trial(cfg, context, i) for i in indices]


def run_experiment(cfg: ExperimentConfig, n_workers: int = 1) -> list[TrialRecord]:
    """Sample scenario -> build channel -> run scheme -> record loss, once
    per trial. Output is sorted by trial index and independent of
    n_workers."""
    prepare = _SCHEMES[cfg.scheme][1]
    context = prepare(cfg) if prepare else None
    indices = list(range(cfg.n_trials))
    if n_workers <= 1:
        records = _run_chunk(cfg, context, indices)
    else:
        chunks = [indices[i::n_workers] for i in range(n_workers)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_chunk, cfg, context, ch) for ch in chunks if ch]
            records = [r for fut in futures for r in fut.result()]
        records.sort(key=lambda r: r.trial_index)
    return records


def losses_of(records) -> np.ndarray:
    return np.array([r.loss_db for r in records if not r.flagged], dtype=float)


def ccdf(records) -> CcdfCurve:
    """Empirical complementary CDF of per-trial loss."""
    if records and isinstance(records[0], TrialRecord):
        losses = losses_of(records)
    else:
        losses = np.asarray(records, dtype=float)
    if losses.size < 1:
        raise ValueError("need at least one unflagged loss value")
    x = np.sort(losses)
    n = x.size
    p = 1.0 - np.arange(1, n + 1) / n
    return CcdfCurve(losses_db=x, probabilities=p)


DEFAULT_PERCENTILES = (10, 25, 50, 75, 90, 95)


def tradeoff_table(
    cfg_base: ExperimentConfig,
    codebook_sizes,
    percentiles=DEFAULT_PERCENTILES,
    n_workers: int = 1,
) -> list[dict]:
    """Loss percentiles vs discovery latency for beam-sweep codebook sizes."""
    if not codebook_sizes:
        raise ValueError("codebook_sizes must be non-empty")
    rows = []
    for size in codebook_sizes:
        params = dict(cfg_base.scheme_params)
        params["n_mwb"] = int(size)
        cfg = replace(cfg_base, scheme="beam-sweep", scheme_params=params)
        records = run_experiment(cfg, n_workers=n_workers)
        losses = losses_of(records)
        row = {
            "n_mwb": int(size),
            "latency_samples": records[0].latency_samples,
        }
        for p in percentiles:
            row[f"p{int(p)}_db"] = float(np.percentile(losses, p))
        rows.append(row)
    return rows


def nr_scaling_study(cfg_base: ExperimentConfig, nr_list, n_workers: int = 1) -> dict:
    """Per-N_r loss records and CCDFs with shared per-trial seeds, so the
    comparison across array sizes is paired draw-for-draw."""
    out = {}
    for n_r in nr_list:
        cfg = replace(cfg_base, n_r=int(n_r))
        records = run_experiment(cfg, n_workers=n_workers)
        out[int(n_r)] = (records, ccdf(records))
    return out


# ---------------------------------------------------------------------------
# CSV output (byte-stable: fixed float formatting, sorted summary keys)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _summary_lines(records) -> list[str]:
    losses = losses_of(records)
    flagged = sum(1 for r in records if r.flagged)
    info = {
        "flagged_trials": flagged,
        "median_loss_db": float(np.median(losses)) if losses.size else math.nan,
        "n_trials": len(records),
        "p90_loss_db": float(np.percentile(losses, 90)) if losses.size else math.nan,
    }
    return [f"# {k} = {_fmt(v)}" for k, v in sorted(info.items())]


def write_trials_csv(records, path, header_comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        for line in _summary_lines(records):
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(
            [
                "trial_index",
                "snr_opt_db",
                "snr_scheme_db",
                "loss_db",
                "latency_samples",
                "flagged",
                "metadata",
            ]
        )
        for r in records:
            w.writerow(
                [
                    r.trial_index,
                    _fmt(r.snr_opt_db),
                    _fmt(r.snr_scheme_db),
                    _fmt(r.loss_db),
                    r.latency_samples,
                    int(r.flagged),
                    json.dumps(r.scheme_metadata, sort_keys=True) if r.scheme_metadata else "",
                ]
            )


def write_ccdf_csv(curve_or_records, path, header_comment: str | None = None):
    if isinstance(curve_or_records, CcdfCurve):
        curve = curve_or_records
        summary = []
    else:
        curve = ccdf(curve_or_records)
        summary = _summary_lines(curve_or_records)
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        for line in summary:
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(["loss_db", "ccdf"])
        for x, p in zip(curve.losses_db, curve.probabilities):
            w.writerow([_fmt(float(x)), _fmt(float(p))])


def write_tradeoff_csv(rows, path, header_comment: str | None = None):
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        cols = list(rows[0].keys())
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])

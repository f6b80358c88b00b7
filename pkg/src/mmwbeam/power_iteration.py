"""Bi-directional noisy power iteration for learning the dominant singular
vectors of a TDD-reciprocal channel.

One iteration spends a forward and a reverse pilot burst, each averaged over
n_noise_avg repeats before normalization, so a budget of n_total pilots
splits as n_total = 2 * n_noise_avg * n_iter. The reverse link is modeled
literally through H^T with conjugated weights rather than idealized as H^H.

Passing rho = +inf on both links runs the exact noise-free recursion
f <- H^H H f / ||.|| without consuming any randomness for noise.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .beamformers import Beamformer, BeamformerPair, Constraint, received_snr, snr_loss_db
from .channel import ChannelMatrix
from .util import from_db

__all__ = [
    "PowerIterConfig",
    "PowerIterTrace",
    "run_noisy",
    "partition_budget",
    "write_trace_csv",
]


@dataclass(frozen=True)
class PowerIterConfig:
    n_total: int
    n_noise_avg: int
    rho_forward_db: float = 0.0
    rho_reverse_db: float = 0.0
    initial_tx: Beamformer | None = None

    def __post_init__(self):
        if self.n_total < 2 or self.n_noise_avg < 1:
            raise ValueError("need n_total >= 2 and n_noise_avg >= 1")
        if self.n_total % (2 * self.n_noise_avg) != 0:
            raise ValueError(
                f"n_total={self.n_total} does not split as 2 * {self.n_noise_avg} * n_iter"
            )
        for rho in (self.rho_forward_db, self.rho_reverse_db):
            if math.isnan(rho):
                raise ValueError("rho must not be NaN")

    @property
    def n_iter(self) -> int:
        return self.n_total // (2 * self.n_noise_avg)


@dataclass(frozen=True)
class PowerIterTrace:
    tx_history: tuple[Beamformer, ...]
    rx_history: tuple[Beamformer, ...]
    rayleigh_quotients: tuple[float, ...]
    final_pair: BeamformerPair

    def __len__(self) -> int:
        return len(self.tx_history)


def _random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    nrm = np.linalg.norm(z)
    while nrm == 0.0:  # probability-zero re-draw
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        nrm = np.linalg.norm(z)
    return z / nrm


def _averaged_noise(rng: np.random.Generator, n: int, n_avg: int) -> np.ndarray:
    z = rng.standard_normal((n_avg, n)) + 1j * rng.standard_normal((n_avg, n))
    return z.mean(axis=0) / math.sqrt(2.0)


def run_noisy(h: ChannelMatrix, cfg: PowerIterConfig, rng: np.random.Generator) -> PowerIterTrace:
    """Iterate the pilot exchange and return per-iteration beamformers, the
    transmit Rayleigh quotient against H^H H, and the final pair."""
    mat = h.h if isinstance(h, ChannelMatrix) else np.asarray(h, dtype=np.complex128)
    n_r, n_t = mat.shape
    gram = mat.conj().T @ mat

    f = (
        cfg.initial_tx.weights.copy()
        if cfg.initial_tx is not None
        else _random_unit(rng, n_t)
    )
    if cfg.initial_tx is not None and abs(np.linalg.norm(f) - 1.0) > 1e-9:
        raise ValueError("initial transmit beamformer must be unit-norm")

    noiseless_f = cfg.rho_forward_db == math.inf
    noiseless_r = cfg.rho_reverse_db == math.inf
    sqrt_rho_f = 0.0 if noiseless_f else math.sqrt(from_db(cfg.rho_forward_db))
    sqrt_rho_r = 0.0 if noiseless_r else math.sqrt(from_db(cfg.rho_reverse_db))

    tx_hist, rx_hist, quotients = [], [], []
    g = None
    for _ in range(cfg.n_iter):
        if noiseless_f:
            g_tilde = mat @ f
        else:
            g_tilde = sqrt_rho_f * (mat @ f) + _averaged_noise(rng, n_r, cfg.n_noise_avg)
        nrm = np.linalg.norm(g_tilde)
        if nrm == 0.0:
            g_tilde = _random_unit(rng, n_r)
            nrm = 1.0
        g = g_tilde / nrm

        # reverse link: physically H^T acting on the conjugated combiner
        if noiseless_r:
            z = mat.T @ g.conj()
        else:
            z = sqrt_rho_r * (mat.T @ g.conj()) + _averaged_noise(rng, n_t, cfg.n_noise_avg).conj()
        nrm = np.linalg.norm(z)
        if nrm == 0.0:
            z = _random_unit(rng, n_t)
            nrm = 1.0
        f = z.conj() / nrm

        tx_hist.append(Beamformer(f.copy(), Constraint.ENERGY))
        rx_hist.append(Beamformer(g.copy(), Constraint.ENERGY))
        quotients.append(float(np.vdot(f, gram @ f).real))

    final = BeamformerPair(tx=tx_hist[-1], rx=rx_hist[-1])
    return PowerIterTrace(
        tx_history=tuple(tx_hist),
        rx_history=tuple(rx_hist),
        rayleigh_quotients=tuple(quotients),
        final_pair=final,
    )


def partition_budget(n_total: int) -> list[tuple[int, int]]:
    """All (n_noise_avg, n_iter) splits of an even pilot budget, ordered by
    increasing n_noise_avg."""
    if n_total % 2 != 0:
        raise ValueError("n_total must be even")
    half = n_total // 2
    out = []
    for n_noi in range(1, half + 1):
        if half % n_noi == 0:
            out.append((n_noi, half // n_noi))
    return out


def write_trace_csv(trace: PowerIterTrace, h: ChannelMatrix, path):
    """Dump iteration, rayleigh_quotient, snr_loss_db rows."""
    from .beamformers import optimal_pair

    ref = optimal_pair(h)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "rayleigh_quotient", "snr_loss_db"])
        for i, (tx, rx, rq) in enumerate(
            zip(trace.tx_history, trace.rx_history, trace.rayleigh_quotients), start=1
        ):
            loss = snr_loss_db(h, BeamformerPair(tx=tx, rx=rx), reference=ref)
            w.writerow([i, f"{rq:.10g}", f"{loss:.10g}"])

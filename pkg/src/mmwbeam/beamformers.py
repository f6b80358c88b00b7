"""Beamformer catalog: the energy-constrained optimum, phase-only schemes,
directional beamforming, beam combining, and phase quantization.

Two weight-vector classes appear throughout:

* energy-constrained: ||w||_2 <= 1 (full gain and phase control),
* equal-gain: |w_i| = 1/sqrt(N) for every antenna (phase-only control).

The receive-side "matched filter" combiners keep the received SNR invariant
to their scaling, so both an L2-normalized and an inf-norm-scaled variant
are provided; only the transmit vector is ever guaranteed equal-gain.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    ArrayGeometry,
    ChannelMatrix,
    PathCluster,
    Scenario,
    build_channel,
    steering_vector,
)
from .linalg import svd
from .util import from_db, to_db

__all__ = [
    "Constraint",
    "RxMode",
    "Beamformer",
    "BeamformerPair",
    "received_snr",
    "snr_loss_db",
    "optimal_pair",
    "power_split_orthogonal_tx",
    "power_split_orthogonal_rx",
    "two_path_optimal_orthogonal_tx",
    "two_path_optimal_orthogonal_rx",
    "egt_rsv_pair",
    "recursive_phase_pair",
    "dominant_directional_pair",
    "matched_filter_rx",
    "phase_only_matched_rx",
    "combine_beams",
    "par",
    "quantize_phases",
    "phase_perturbation_study",
]


class Constraint(enum.Enum):
    ENERGY = "energy"
    EQUAL_GAIN = "equal_gain"


class RxMode(enum.Enum):
    MATCHED_FILTER = "matched_filter"
    DOMINANT_DIRECTION = "dominant_direction"


@dataclass(frozen=True)
class Beamformer:
    weights: np.ndarray
    constraint: Constraint

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128).reshape(-1)
        object.__setattr__(self, "weights", w)
        if not np.isfinite(w).all():
            raise ValueError("beamformer weights must be finite")
        if self.constraint is Constraint.ENERGY:
            if np.linalg.norm(w) > 1.0 + 1e-12:
                raise ValueError("energy-constrained weights must satisfy ||w||_2 <= 1")
        else:
            target = 1.0 / math.sqrt(w.size)
            if np.max(np.abs(np.abs(w) - target)) > 1e-12:
                raise ValueError("equal-gain weights must all have magnitude 1/sqrt(N)")

    @property
    def n(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class BeamformerPair:
    tx: Beamformer
    rx: Beamformer


def _channel_array(h) -> np.ndarray:
    if isinstance(h, ChannelMatrix):
        return h.h
    return np.asarray(h, dtype=np.complex128)


def _weights(b) -> np.ndarray:
    if isinstance(b, Beamformer):
        return b.weights
    return np.asarray(b, dtype=np.complex128).reshape(-1)


def received_snr(h, pair: BeamformerPair, rho_db: float = 0.0) -> float:
    """rho * |g^H H f|^2 / (g^H g), invariant to rescaling g."""
    mat = _channel_array(h)
    f = _weights(pair.tx)
    g = _weights(pair.rx)
    gg = float(np.vdot(g, g).real)
    if gg == 0.0:
        raise ValueError("receive beamformer must be nonzero")
    num = abs(np.vdot(g, mat @ f)) ** 2
    return float(from_db(rho_db)) * num / gg


def snr_loss_db(h, pair: BeamformerPair, reference: BeamformerPair | None = None) -> float:
    """10*log10(SNR_opt / SNR_pair) against the energy-constrained optimum."""
    ref = reference if reference is not None else optimal_pair(h)
    return float(to_db(received_snr(h, ref)) - to_db(received_snr(h, pair)))


def optimal_pair(h) -> BeamformerPair:
    """Dominant right singular vector at the transmitter with its matched
    filter at the receiver; achieves rho * sigma_1^2."""
    mat = _channel_array(h)
    res = svd(mat)
    if res.s[0] <= 0.0:
        raise ValueError("optimal beamforming undefined for the zero channel")
    v1 = res.v[:, 0]
    hv = mat @ v1
    g = hv / np.linalg.norm(hv)
    return BeamformerPair(
        tx=Beamformer(v1, Constraint.ENERGY),
        rx=Beamformer(g, Constraint.ENERGY),
    )


def _unit(x: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return x / nrm


def _check_unit(name: str, x: np.ndarray):
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValueError(f"{name} must be unit-norm")


def power_split_orthogonal_tx(alpha1, alpha2, rx_overlap: float) -> float:
    """Transmit power fraction beta^2 on path 1 when the transmit steering
    vectors are orthogonal, as a function of |u1^H u2|."""
    d = abs(alpha1) ** 2 - abs(alpha2) ** 2
    denom = math.sqrt(d * d + 4.0 * abs(alpha1) ** 2 * abs(alpha2) ** 2 * rx_overlap**2)
    ratio = d / denom if denom > 0.0 else 0.0
    return min(max(0.5 * (1.0 + ratio), 0.0), 1.0)


def power_split_orthogonal_rx(alpha1, alpha2, tx_overlap: float) -> float:
    """Transmit power fraction beta^2 on path 1 when the receive steering
    vectors are orthogonal, as a function of p = |v1^H v2|. Degenerates to
    all-or-nothing as p -> 0."""
    p = float(tx_overlap)
    if p < 1e-12:
        return 1.0 if abs(alpha1) >= abs(alpha2) else 0.0
    m1, m2 = abs(alpha1) ** 2, abs(alpha2) ** 2
    d = m1 - m2
    total = m1 + m2
    a_term = d * d / p**2 + 2.0 * m1 * total
    b_term = d**4 / p**4 + 4.0 * m1 * m2 * d * d / p**2
    c_term = (1.0 + 1.0 / p**2) * total**2 - 4.0 * m1 * m2 / p**2
    root = math.sqrt(max(b_term, 0.0))
    if abs(alpha1) >= abs(alpha2):
        beta2 = (a_term + root) / (2.0 * c_term)
    else:
        beta2 = (a_term - root) / (2.0 * c_term)
    return min(max(beta2, 0.0), 1.0)


def two_path_optimal_orthogonal_tx(alpha1, alpha2, u1, u2, v1, v2) -> BeamformerPair:
    """Closed-form optimum for a two-path channel whose transmit steering
    vectors are orthogonal. Power split beta^2 rides the gain imbalance;
    the cross-path phase is compensated so both arrivals add coherently."""
    u1, u2, v1, v2 = (np.asarray(x, dtype=np.complex128).reshape(-1) for x in (u1, u2, v1, v2))
    for name, vec in (("u1", u1), ("u2", u2), ("v1", v1), ("v2", v2)):
        _check_unit(name, vec)
    if abs(np.vdot(v1, v2)) > 1e-9:
        raise ValueError("transmit steering vectors must be orthogonal")
    a1, a2 = complex(alpha1), complex(alpha2)
    uu = complex(np.vdot(u1, u2))
    beta2 = power_split_orthogonal_tx(a1, a2, abs(uu))
    beta = math.sqrt(beta2)
    rest = math.sqrt(1.0 - beta2)
    psi = np.angle(a1) - np.angle(a2) - np.angle(uu)
    phase = np.exp(1j * psi)
    f = _unit(beta * v1 + phase * rest * v2)
    g = _unit(a1 * beta * u1 + phase * a2 * rest * u2)
    return BeamformerPair(
        tx=Beamformer(f, Constraint.ENERGY),
        rx=Beamformer(g, Constraint.ENERGY),
    )


def two_path_optimal_orthogonal_rx(alpha1, alpha2, u1, u2, v1, v2) -> BeamformerPair:
    """Closed-form optimum for a two-path channel whose receive steering
    vectors are orthogonal. When the transmit vectors are also (numerically)
    orthogonal the power-split expressions degenerate, and all power goes to
    the stronger path instead."""
    u1, u2, v1, v2 = (np.asarray(x, dtype=np.complex128).reshape(-1) for x in (u1, u2, v1, v2))
    for name, vec in (("u1", u1), ("u2", u2), ("v1", v1), ("v2", v2)):
        _check_unit(name, vec)
    if abs(np.vdot(u1, u2)) > 1e-9:
        raise ValueError("receive steering vectors must be orthogonal")
    a1, a2 = complex(alpha1), complex(alpha2)
    vv = complex(np.vdot(v1, v2))
    p = abs(vv)
    beta2 = power_split_orthogonal_rx(a1, a2, p)
    beta = math.sqrt(beta2)
    rest = math.sqrt(1.0 - beta2)
    phase = np.exp(-1j * np.angle(vv)) if p > 0.0 else 1.0
    f = _unit(beta * v1 + phase * rest * v2)
    g = _unit(a1 * (beta + p * rest) * u1 + phase * a2 * (p * beta + rest) * u2)
    return BeamformerPair(
        tx=Beamformer(f, Constraint.ENERGY),
        rx=Beamformer(g, Constraint.ENERGY),
    )


def matched_filter_rx(h, tx) -> Beamformer:
    """L2-normalized matched filter to the transmitted beam."""
    y = _channel_array(h) @ _weights(tx)
    return Beamformer(_unit(y), Constraint.ENERGY)


def phase_only_matched_rx(h, tx) -> Beamformer:
    """Matched filter scaled to respect a per-antenna amplitude cap: the
    largest weight magnitude is exactly 1/sqrt(N_r), so ||g||_2 <= 1."""
    y = _channel_array(h) @ _weights(tx)
    peak = np.max(np.abs(y))
    if peak == 0.0:
        raise ValueError("matched filter undefined for the zero response")
    g = y / (peak * math.sqrt(y.size))
    return Beamformer(g, Constraint.ENERGY)


def _equal_gain_from_phases(phases: np.ndarray) -> Beamformer:
    n = phases.size
    w = np.exp(1j * phases) / math.sqrt(n)
    return Beamformer(w, Constraint.EQUAL_GAIN)


def egt_rsv_pair(h) -> BeamformerPair:
    """Equal-gain projection of the dominant right singular vector, paired
    with its amplitude-capped matched filter. Zero entries get phase 0."""
    mat = _channel_array(h)
    res = svd(mat)
    if res.s[0] <= 0.0:
        raise ValueError("undefined for the zero channel")
    tx = _equal_gain_from_phases(np.angle(res.v[:, 0]))
    return BeamformerPair(tx=tx, rx=phase_only_matched_rx(mat, tx))


def recursive_phase_pair(h) -> BeamformerPair:
    """Phase-only transmit beam built by recursively aligning each channel
    column with the running combination of the previous ones; needs only
    column inner products, not the full decomposition."""
    mat = _channel_array(h)
    n_t = mat.shape[1]
    gram = mat.conj().T @ mat
    phases = np.zeros(n_t)
    for i in range(1, n_t):
        s = complex(np.sum(np.exp(1j * phases[:i]) * gram[i, :i]))
        phases[i] = 0.0 if s == 0 else np.angle(s)
    tx = _equal_gain_from_phases(phases)
    return BeamformerPair(tx=tx, rx=phase_only_matched_rx(mat, tx))


def dominant_directional_pair(
    h: ChannelMatrix,
    paths=None,
    rx_mode: RxMode = RxMode.DOMINANT_DIRECTION,
) -> BeamformerPair:
    """Steer at the strongest path's departure angle; receive either with a
    matched filter or by steering at the same path's arrival angle. Gain
    ties resolve to the lowest path index."""
    if paths is None:
        if h.source is None:
            raise ValueError("paths required when the channel has no scenario")
        paths = h.source.paths
    scen = h.source
    if scen is None:
        raise ValueError("dominant_directional_pair needs array geometries from a scenario")
    gains = np.array([abs(p.gain) for p in paths])
    best = int(np.argmax(gains))
    tx = Beamformer(steering_vector(scen.tx, paths[best].aod_deg), Constraint.EQUAL_GAIN)
    if rx_mode is RxMode.MATCHED_FILTER:
        rx = matched_filter_rx(h, tx)
    else:
        rx = Beamformer(steering_vector(scen.rx, paths[best].aoa_deg), Constraint.EQUAL_GAIN)
    return BeamformerPair(tx=tx, rx=rx)


def combine_beams(weights, aods_deg, tx_geom: ArrayGeometry) -> Beamformer:
    """Weighted sum of steering beams, normalized to unit energy. Mimics a
    multi-path transmit combination at the cost of non-constant amplitudes."""
    weights = np.asarray(weights, dtype=np.complex128).reshape(-1)
    aods_deg = np.asarray(aods_deg, dtype=float).reshape(-1)
    if weights.size != aods_deg.size or weights.size < 1:
        raise ValueError("weights and directions must be equal-length, non-empty")
    f = np.zeros(tx_geom.n_elements, dtype=np.complex128)
    for w, ang in zip(weights, aods_deg):
        f += w * steering_vector(tx_geom, float(ang))
    nrm = np.linalg.norm(f)
    if nrm < 1e-300:
        raise ValueError("beam combination collapsed to zero")
    return Beamformer(f / nrm, Constraint.ENERGY)


def par(f: Beamformer) -> float:
    """Peak-to-average power ratio N * max|f_i|^2 / ||f||^2 (1 for any
    constant-modulus beam)."""
    w = _weights(f)
    e = float(np.vdot(w, w).real)
    if e == 0.0:
        raise ValueError("PAR undefined for the zero vector")
    return w.size * float(np.max(np.abs(w)) ** 2) / e


def quantize_phases(f: Beamformer, bits: int) -> Beamformer:
    """Snap each weight to the nearest of 2**bits phases at equal gain."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    w = _weights(f)
    step = 2.0 * math.pi / (2**bits)
    q = np.round(np.angle(w) / step) * step
    return _equal_gain_from_phases(q)


def _with_gain_phase(scen: Scenario, path_index: int, delta_rad: float) -> Scenario:
    paths = list(scen.paths)
    p = paths[path_index]
    rotated = PathCluster(
        gain=complex(p.gain) * complex(math.cos(delta_rad), math.sin(delta_rad)),
        aoa_deg=p.aoa_deg,
        aod_deg=p.aod_deg,
    )
    paths[path_index] = rotated
    return Scenario(
        rx=scen.rx,
        tx=scen.tx,
        paths=tuple(paths),
        fov_deg=scen.fov_deg,
        rho_forward_db=scen.rho_forward_db,
        rho_reverse_db=scen.rho_reverse_db,
    )


def phase_perturbation_study(base: Scenario, phase_grid_deg) -> list[tuple[float, float, float]]:
    """Loss of the frozen optimal pair and the frozen dominant-directional
    pair when the dominant path's gain phase rotates away from the design
    point. Rows are (phase_deg, loss_rsv_db, loss_directional_db)."""
    if len(base.paths) != 2:
        raise ValueError("perturbation study is defined for two-path scenarios")
    gains = [abs(p.gain) for p in base.paths]
    dom = int(np.argmax(gains))
    h0 = build_channel(base)
    pair_rsv = optimal_pair(h0)
    pair_dir = dominant_directional_pair(h0, rx_mode=RxMode.DOMINANT_DIRECTION)
    rows = []
    for deg in np.asarray(phase_grid_deg, dtype=float).reshape(-1):
        hp = build_channel(_with_gain_phase(base, dom, math.radians(float(deg))))
        ref = optimal_pair(hp)
        rows.append(
            (
                float(deg),
                snr_loss_db(hp, pair_rsv, reference=ref),
                snr_loss_db(hp, pair_dir, reference=ref),
            )
        )
    return rows

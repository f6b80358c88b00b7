"""Bi-directional direction learning from noisy pilot snapshots.

The wide end learns departure angles from uplink snapshots and the small end
learns arrival angles from downlink snapshots. Probing beams are fresh
random equal-gain vectors each snapshot (the probing scheme is a modeling
choice: it excites every direction without per-antenna power spikes), and
each snapshot averages n_noi pilot repeats before use. The uplink is
modeled through H^T with conjugation, mirroring the reverse link of the
power-iteration protocol.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, ChannelMatrix, beamspace
from .linalg import eigh
from .util import from_db

__all__ = [
    "Side",
    "MusicBudget",
    "Pseudospectrum",
    "MusicEstimate",
    "standard_budget",
    "simulate_snapshots",
    "sample_covariance",
    "pseudospectrum",
    "find_peaks",
    "learn_directions",
]

VALUE_CLAMP = 1e12
DEFAULT_GRID_STEP_DEG = 0.05


class Side(enum.Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"


@dataclass(frozen=True)
class MusicBudget:
    """Pilot budget split between the two link directions; each direction
    factors as (covariance snapshots) x (noise-averaging repeats)."""

    n_up_cov: int
    n_up_noi: int
    n_down_cov: int
    n_down_noi: int

    def __post_init__(self):
        for name in ("n_up_cov", "n_up_noi", "n_down_cov", "n_down_noi"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n_up(self) -> int:
        return self.n_up_cov * self.n_up_noi

    @property
    def n_down(self) -> int:
        return self.n_down_cov * self.n_down_noi

    @property
    def n_total(self) -> int:
        return self.n_up + self.n_down


def standard_budget(n_up_cov: int = 96) -> MusicBudget:
    """256-pilot default: 192 uplink samples factored around n_up_cov and
    64 downlink samples split 8 x 8."""
    if 192 % n_up_cov != 0:
        raise ValueError("n_up_cov must divide 192")
    return MusicBudget(
        n_up_cov=n_up_cov,
        n_up_noi=192 // n_up_cov,
        n_down_cov=8,
        n_down_noi=8,
    )


@dataclass(frozen=True)
class Pseudospectrum:
    grid_deg: np.ndarray
    values: np.ndarray
    model_order: int

    def __post_init__(self):
        g = np.asarray(self.grid_deg, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid_deg", g)
        object.__setattr__(self, "values", v)
        if g.size != v.size:
            raise ValueError("grid and values must have equal length")
        if not np.all(np.diff(g) > 0):
            raise ValueError("grid must be strictly increasing")
        if not (np.isfinite(v).all() and (v > 0).all()):
            raise ValueError("pseudospectrum values must be finite and positive")


@dataclass(frozen=True)
class MusicEstimate:
    aod_deg: tuple[float, ...]
    aoa_deg: tuple[float, ...]
    aod_shortfall: bool
    aoa_shortfall: bool


def _random_equal_gain(rng: np.random.Generator, n: int) -> np.ndarray:
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return np.exp(1j * phases) / math.sqrt(n)


def _averaged_noise(rng: np.random.Generator, n: int, n_avg: int) -> np.ndarray:
    z = rng.standard_normal((n_avg, n)) + 1j * rng.standard_normal((n_avg, n))
    return z.mean(axis=0) / math.sqrt(2.0)


def simulate_snapshots(
    h: ChannelMatrix,
    side: Side,
    budget: MusicBudget,
    rng: np.random.Generator,
    rho_db: float | None = None,
) -> np.ndarray:
    """Collect one column per covariance snapshot (dim x n_cov).

    rho_db overrides the scenario's link SNR; +inf disables noise.
    """
    mat = h.h
    scen = h.source
    if rho_db is None:
        if scen is None:
            raise ValueError("rho_db required when the channel has no scenario")
        rho_db = scen.rho_reverse_db if side is Side.UPLINK else scen.rho_forward_db
    noiseless = rho_db == math.inf
    sqrt_rho = 0.0 if noiseless else math.sqrt(from_db(rho_db))

    if side is Side.UPLINK:
        n_probe, n_obs = mat.shape[0], mat.shape[1]
        n_cov, n_noi = budget.n_up_cov, budget.n_up_noi
    else:
        n_probe, n_obs = mat.shape[1], mat.shape[0]
        n_cov, n_noi = budget.n_down_cov, budget.n_down_noi

    cols = np.empty((n_obs, n_cov), dtype=np.complex128)
    for j in range(n_cov):
        w = _random_equal_gain(rng, n_probe)
        if side is Side.UPLINK:
            signal = mat.T @ w.conj()  # reverse link through H^T, conjugated probe
            if noiseless:
                cols[:, j] = signal.conj()
            else:
                z = sqrt_rho * signal + _averaged_noise(rng, n_obs, n_noi).conj()
                cols[:, j] = z.conj()
        else:
            signal = mat @ w
            if noiseless:
                cols[:, j] = signal
            else:
                cols[:, j] = sqrt_rho * signal + _averaged_noise(rng, n_obs, n_noi)
    return cols


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    """(1/n) * sum of y y^H, exactly Hermitian by symmetrization."""
    y = np.asarray(snapshots, dtype=np.complex128)
    if y.ndim != 2 or y.shape[1] < 1:
        raise ValueError("need at least one snapshot column")
    r = (y @ y.conj().T) / y.shape[1]
    return (r + r.conj().T) / 2.0


def _steering_grid(geom: ArrayGeometry, grid_deg: np.ndarray) -> np.ndarray:
    omegas = np.array([beamspace(a, geom.spacing_over_wavelength) for a in grid_deg])
    n = np.arange(geom.n_elements)
    return np.exp(1j * np.outer(n, omegas)) / math.sqrt(geom.n_elements)


def pseudospectrum(
    r: np.ndarray,
    k: int,
    geom: ArrayGeometry,
    grid_deg: np.ndarray,
) -> Pseudospectrum:
    """Inverse projection onto the noise subspace, clamped at 1e12. Peaks
    mark candidate source directions."""
    r = np.asarray(r, dtype=np.complex128)
    dim = r.shape[0]
    if not 1 <= k < dim:
        raise ValueError(f"model order {k} must satisfy 1 <= k < {dim}")
    res = eigh(r)
    noise_basis = res.vectors[:, k:]
    steer = _steering_grid(geom, np.asarray(grid_deg, dtype=float))
    denom = np.sum(np.abs(noise_basis.conj().T @ steer) ** 2, axis=0)
    values = 1.0 / np.maximum(denom, 1.0 / VALUE_CLAMP)
    return Pseudospectrum(grid_deg=np.asarray(grid_deg, dtype=float), values=values, model_order=k)


def find_peaks(ps: Pseudospectrum, k: int, min_separation_steps: int = 2):
    """Top-k local maxima, value-ranked and at least min_separation_steps
    grid points apart. Returns (angles, shortfall)."""
    v = ps.values
    n = v.size
    left_ok = np.empty(n, dtype=bool)
    left_ok[0] = True
    left_ok[1:] = v[1:] > v[:-1]  # strict on the left keeps one point per plateau
    right_ok = np.empty(n, dtype=bool)
    right_ok[-1] = True
    right_ok[:-1] = v[:-1] >= v[1:]
    idx = np.flatnonzero(left_ok & right_ok)
    order = idx[np.argsort(-v[idx], kind="stable")]
    chosen: list[int] = []
    for i in order:
        if all(abs(i - j) >= min_separation_steps for j in chosen):
            chosen.append(int(i))
        if len(chosen) == k:
            break
    angles = tuple(float(ps.grid_deg[i]) for i in chosen)
    return angles, len(angles) < k


def default_grid(fov_deg: tuple[float, float], step_deg: float = DEFAULT_GRID_STEP_DEG) -> np.ndarray:
    lo, hi = fov_deg
    n = int(round((hi - lo) / step_deg)) + 1
    return np.linspace(lo, hi, n)


def learn_directions(
    h: ChannelMatrix,
    budget: MusicBudget,
    k: int,
    rng: np.random.Generator,
    grid_step_deg: float = DEFAULT_GRID_STEP_DEG,
    rho_up_db: float | None = None,
    rho_down_db: float | None = None,
) -> MusicEstimate:
    """Uplink snapshots give departure-angle estimates, downlink snapshots
    give arrival-angle estimates, each as the top-k pseudospectrum peaks
    (value-ranked, so index 0 is the most confident direction)."""
    scen = h.source
    if scen is None:
        raise ValueError("learn_directions needs array geometries from a scenario")
    if k > min(h.n_r, h.n_t):
        raise ValueError("model order cannot exceed the smaller array size")
    grid = default_grid(scen.fov_deg, grid_step_deg)

    up = simulate_snapshots(h, Side.UPLINK, budget, rng, rho_db=rho_up_db)
    ps_up = pseudospectrum(sample_covariance(up), k, scen.tx, grid)
    aod, short_up = find_peaks(ps_up, k)

    down = simulate_snapshots(h, Side.DOWNLINK, budget, rng, rho_db=rho_down_db)
    ps_down = pseudospectrum(sample_covariance(down), k, scen.rx, grid)
    aoa, short_down = find_peaks(ps_down, k)

    return MusicEstimate(
        aod_deg=aod,
        aoa_deg=aoa,
        aod_shortfall=short_up,
        aoa_shortfall=short_down,
    )

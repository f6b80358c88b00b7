"""Geometric multipath channel synthesis for uniform linear arrays.

Angles are degrees at the API boundary and radians internally. Elevation
is fixed at broadside (azimuth-only model), so the steering phase of
element m at azimuth phi is m * 2*pi*(d/lambda) * cos(phi).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "PathCluster",
    "Scenario",
    "ChannelMatrix",
    "steering_vector",
    "build_channel",
    "sample_scenario",
    "beamspace",
    "trial_rng",
    "demo_two_path_scenario",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """ULA with n_elements antennas spaced d/lambda wavelengths apart."""

    n_elements: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if not self.spacing_over_wavelength > 0:
            raise ValueError("spacing_over_wavelength must be > 0")


@dataclass(frozen=True)
class PathCluster:
    """One scatterer: complex gain plus azimuth AoA/AoD in degrees."""

    gain: complex
    aoa_deg: float
    aod_deg: float


@dataclass(frozen=True)
class Scenario:
    """Everything needed to synthesize one channel draw."""

    rx: ArrayGeometry
    tx: ArrayGeometry
    paths: tuple[PathCluster, ...]
    fov_deg: tuple[float, float] = (30.0, 150.0)
    rho_forward_db: float = 0.0
    rho_reverse_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "fov_deg", tuple(float(x) for x in self.fov_deg))
        if not self.paths:
            raise ValueError("scenario needs at least one path")
        if not (math.isfinite(self.rho_forward_db) and math.isfinite(self.rho_reverse_db)):
            raise ValueError("rho values must be finite")
        lo, hi = self.fov_deg
        if not lo < hi:
            raise ValueError("fov_deg must be an increasing interval")
        for p in self.paths:
            if not (lo <= p.aoa_deg <= hi and lo <= p.aod_deg <= hi):
                raise ValueError(f"path angles {p.aoa_deg}/{p.aod_deg} outside fov {self.fov_deg}")

    def to_json(self) -> str:
        doc = {
            "rx": {
                "n_elements": self.rx.n_elements,
                "spacing_over_wavelength": self.rx.spacing_over_wavelength,
            },
            "tx": {
                "n_elements": self.tx.n_elements,
                "spacing_over_wavelength": self.tx.spacing_over_wavelength,
            },
            "paths": [
                {
                    "gain": [p.gain.real, p.gain.imag],
                    "aoa_deg": p.aoa_deg,
                    "aod_deg": p.aod_deg,
                }
                for p in self.paths
            ],
            "fov_deg": list(self.fov_deg),
            "rho_forward_db": self.rho_forward_db,
            "rho_reverse_db": self.rho_reverse_db,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        return cls(
            rx=ArrayGeometry(**doc["rx"]),
            tx=ArrayGeometry(**doc["tx"]),
            paths=tuple(
                PathCluster(
                    gain=complex(p["gain"][0], p["gain"][1]),
                    aoa_deg=float(p["aoa_deg"]),
                    aod_deg=float(p["aod_deg"]),
                )
                for p in doc["paths"]
            ),
            fov_deg=tuple(doc["fov_deg"]),
            rho_forward_db=float(doc["rho_forward_db"]),
            rho_reverse_db=float(doc["rho_reverse_db"]),
        )


@dataclass(frozen=True)
class ChannelMatrix:
    """Synthesized N_r x N_t channel plus the scenario it came from."""

    h: np.ndarray
    source: Scenario | None = None

    @property
    def n_r(self) -> int:
        return self.h.shape[0]

    @property
    def n_t(self) -> int:
        return self.h.shape[1]


def steering_vector(geom: ArrayGeometry, angle_deg: float) -> np.ndarray:
    """Unit-norm constant-phase-offset steering vector for one azimuth."""
    omega = beamspace(angle_deg, geom.spacing_over_wavelength)
    n = np.arange(geom.n_elements)
    return np.exp(1j * omega * n) / math.sqrt(geom.n_elements)


def beamspace(angle_deg: float, d_over_lambda: float = 0.5) -> float:
    """Spatial frequency Omega = 2*pi*(d/lambda)*cos(angle)."""
    return 2.0 * math.pi * d_over_lambda * math.cos(math.radians(angle_deg))


def build_channel(s: Scenario) -> ChannelMatrix:
    """Sum of rank-1 path contributions, sqrt(N_r*N_t/L)-normalized so that
    E[||H||_F^2] = N_r*N_t under unit-variance path gains."""
    n_r, n_t = s.rx.n_elements, s.tx.n_elements
    h = np.zeros((n_r, n_t), dtype=np.complex128)
    for p in s.paths:
        u = steering_vector(s.rx, p.aoa_deg)
        v = steering_vector(s.tx, p.aod_deg)
        h += complex(p.gain) * np.outer(u, v.conj())
    h *= math.sqrt(n_r * n_t / len(s.paths))
    return ChannelMatrix(h=h, source=s)


def sample_scenario(
    rng: np.random.Generator,
    l: int,
    rx: ArrayGeometry,
    tx: ArrayGeometry,
    fov_deg: tuple[float, float] = (30.0, 150.0),
    rho_forward_db: float = 0.0,
    rho_reverse_db: float = 0.0,
) -> Scenario:
    """Random scenario: angles i.i.d. uniform over the field of view and
    gains i.i.d. standard complex Gaussian.

    Draw order is fixed (AoAs, AoDs, gain reals, gain imags) and does not
    depend on the array geometries, so draws are paired across antenna
    configurations that share an rng state.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    lo, hi = fov_deg
    aoa = rng.uniform(lo, hi, size=l)
    aod = rng.uniform(lo, hi, size=l)
    re = rng.standard_normal(l)
    im = rng.standard_normal(l)
    gains = (re + 1j * im) / math.sqrt(2.0)
    paths = tuple(
        PathCluster(gain=complex(gains[i]), aoa_deg=float(aoa[i]), aod_deg=float(aod[i]))
        for i in range(l)
    )
    return Scenario(
        rx=rx,
        tx=tx,
        paths=paths,
        fov_deg=fov_deg,
        rho_forward_db=rho_forward_db,
        rho_reverse_db=rho_reverse_db,
    )


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Per-trial stream keyed by (master_seed, trial_index).

    Streams are independent of execution order, so Monte Carlo trials can be
    farmed out to workers without changing results.
    """
    if master_seed < 0 or trial_index < 0:
        raise ValueError("seed and trial index must be non-negative")
    return np.random.default_rng([master_seed, trial_index])


def demo_two_path_scenario(rho_forward_db: float = 0.0, rho_reverse_db: float = 0.0) -> Scenario:
    """A fixed two-path 4x64 scenario with a strongly dominant path, used by
    the phase-perturbation study and regression tests."""
    return Scenario(
        rx=ArrayGeometry(4),
        tx=ArrayGeometry(64),
        paths=(
            PathCluster(gain=2.61 + 0j, aoa_deg=108.57, aod_deg=83.74),
            PathCluster(gain=1.79 + 0j, aoa_deg=92.74, aod_deg=94.26),
        ),
        rho_forward_db=rho_forward_db,
        rho_reverse_db=rho_reverse_db,
    )

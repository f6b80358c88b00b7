import math

import numpy as np
import pytest

from mmwbeam.channel import (
    ArrayGeometry,
    PathCluster,
    Scenario,
    build_channel,
    sample_scenario,
    steering_vector,
    trial_rng,
)
from mmwbeam.music import (
    MusicBudget,
    Side,
    default_grid,
    find_peaks,
    learn_directions,
    pseudospectrum,
    sample_covariance,
    simulate_snapshots,
    standard_budget,
)
from mmwbeam.util import from_db

RX4 = ArrayGeometry(4)
TX64 = ArrayGeometry(64)


def test_budget_factorization():
    b = standard_budget(96)
    assert (b.n_up, b.n_down, b.n_total) == (192, 64, 256)
    assert b.n_up_cov * b.n_up_noi == b.n_up
    assert b.n_down_cov * b.n_down_noi == b.n_down
    for n_up_cov in (12, 24, 32, 48, 64, 96):
        assert standard_budget(n_up_cov).n_up == 192
    with pytest.raises(ValueError):
        standard_budget(13)
    with pytest.raises(ValueError):
        MusicBudget(0, 1, 1, 1)


def test_noiseless_single_path_snapshots_span_steering_vector():
    scen = Scenario(rx=RX4, tx=TX64, paths=(PathCluster(1.2 + 0.3j, 75.0, 115.0),))
    h = build_channel(scen)
    budget = MusicBudget(n_up_cov=8, n_up_noi=1, n_down_cov=8, n_down_noi=1)
    down = simulate_snapshots(h, Side.DOWNLINK, budget, trial_rng(0, 0), rho_db=math.inf)
    u = steering_vector(RX4, 75.0)
    proj = np.outer(u, u.conj())
    for j in range(down.shape[1]):
        resid = down[:, j] - proj @ down[:, j]
        assert np.linalg.norm(resid) < 1e-9 * max(np.linalg.norm(down[:, j]), 1e-30)
    up = simulate_snapshots(h, Side.UPLINK, budget, trial_rng(0, 1), rho_db=math.inf)
    v = steering_vector(TX64, 115.0)
    projv = np.outer(v, v.conj())
    for j in range(up.shape[1]):
        resid = up[:, j] - projv @ up[:, j]
        assert np.linalg.norm(resid) < 1e-9 * max(np.linalg.norm(up[:, j]), 1e-30)


def test_snapshots_deterministic():
    scen = sample_scenario(trial_rng(1, 0), 2, RX4, TX64, (30.0, 150.0), -10.0, -10.0)
    h = build_channel(scen)
    budget = standard_budget(24)
    a = simulate_snapshots(h, Side.UPLINK, budget, trial_rng(1, 1))
    b = simulate_snapshots(h, Side.UPLINK, budget, trial_rng(1, 1))
    assert np.array_equal(a, b)


def test_snapshot_second_moment_matches_analytic_covariance():
    scen = sample_scenario(trial_rng(2, 0), 2, RX4, TX64, (30.0, 150.0), -5.0, -5.0)
    h = build_channel(scen)
    budget = MusicBudget(n_up_cov=1, n_up_noi=1, n_down_cov=10_000, n_down_noi=1)
    snaps = simulate_snapshots(h, Side.DOWNLINK, budget, trial_rng(2, 1))
    got = sample_covariance(snaps)
    rho = from_db(-5.0)
    want = (rho / 64.0) * (h.h @ h.h.conj().T) + np.eye(4)
    err = np.linalg.norm(got - want, 2) / np.linalg.norm(want, 2)
    assert err < 0.10


def test_sample_covariance_properties():
    rng = trial_rng(3, 0)
    y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    single = sample_covariance(y[:, None])
    assert np.allclose(single, np.outer(y, y.conj()))

    # noise-only snapshots converge to the identity
    z = (rng.standard_normal((4, 10_000)) + 1j * rng.standard_normal((4, 10_000))) / math.sqrt(2)
    r = sample_covariance(z)
    assert np.array_equal(r, r.conj().T)  # exactly Hermitian by construction
    assert np.linalg.norm(r - np.eye(4), 2) < 0.05
    evals = np.linalg.eigvalsh(r)
    assert np.all(evals >= -1e-10)


def test_pseudospectrum_exact_rank_one():
    u = steering_vector(TX64, 97.3)
    r = 5.0 * np.outer(u, u.conj()) + np.eye(64)
    grid = default_grid((30.0, 150.0))
    ps = pseudospectrum(r, 1, TX64, grid)
    best = grid[np.argmax(ps.values)]
    assert abs(best - 97.3) <= 0.05


def test_pseudospectrum_identity_is_flat():
    grid = default_grid((30.0, 150.0), 0.5)
    ps = pseudospectrum(np.eye(8, dtype=complex), 2, ArrayGeometry(8), grid)
    assert np.max(ps.values) - np.min(ps.values) <= 1e-9 * np.max(ps.values)


def test_pseudospectrum_two_sources_exact_covariance():
    geom = ArrayGeometry(16)
    u1, u2 = steering_vector(geom, 60.0), steering_vector(geom, 120.0)
    r = 3.0 * np.outer(u1, u1.conj()) + 2.0 * np.outer(u2, u2.conj()) + np.eye(16)
    grid = default_grid((30.0, 150.0))
    ps = pseudospectrum(r, 2, geom, grid)
    peaks, short = find_peaks(ps, 2)
    assert not short
    assert sorted(abs(p - t) for p, t in zip(sorted(peaks), [60.0, 120.0]))[-1] <= 0.05


def test_pseudospectrum_invariant_to_covariance_scaling():
    geom = ArrayGeometry(16)
    u1 = steering_vector(geom, 80.0)
    r = 4.0 * np.outer(u1, u1.conj()) + np.eye(16)
    grid = default_grid((30.0, 150.0), 0.2)
    a, _ = find_peaks(pseudospectrum(r, 1, geom, grid), 1)
    b, _ = find_peaks(pseudospectrum(17.0 * r, 1, geom, grid), 1)
    assert a == b


def test_pseudospectrum_model_order_validation():
    with pytest.raises(ValueError):
        pseudospectrum(np.eye(4, dtype=complex), 4, RX4, default_grid((30.0, 150.0), 1.0))


def test_learn_directions_noiseless_single_path():
    scen = Scenario(
        rx=RX4,
        tx=TX64,
        paths=(PathCluster(1.0 + 0j, 66.3, 131.7),),
    )
    h = build_channel(scen)
    budget = MusicBudget(n_up_cov=16, n_up_noi=1, n_down_cov=16, n_down_noi=1)
    est = learn_directions(h, budget, 1, trial_rng(4, 0), rho_up_db=math.inf, rho_down_db=math.inf)
    assert abs(est.aod_deg[0] - 131.7) <= 0.05
    assert abs(est.aoa_deg[0] - 66.3) <= 0.05
    assert not est.aod_shortfall and not est.aoa_shortfall


def test_learn_directions_permutation_invariant():
    paths = (
        PathCluster(0.9 + 0.1j, 70.0, 60.0),
        PathCluster(0.5 - 0.6j, 120.0, 130.0),
    )
    scen_a = Scenario(rx=RX4, tx=TX64, paths=paths, rho_forward_db=0.0, rho_reverse_db=0.0)
    scen_b = Scenario(rx=RX4, tx=TX64, paths=paths[::-1], rho_forward_db=0.0, rho_reverse_db=0.0)
    budget = standard_budget(96)
    est_a = learn_directions(build_channel(scen_a), budget, 2, trial_rng(5, 0))
    est_b = learn_directions(build_channel(scen_b), budget, 2, trial_rng(5, 0))
    assert set(est_a.aod_deg) == set(est_b.aod_deg)
    assert set(est_a.aoa_deg) == set(est_b.aoa_deg)


def test_peak_separation_enforced():
    values = np.array([1.0, 5.0, 4.9, 4.8, 1.0, 1.1, 1.0])
    from mmwbeam.music import Pseudospectrum

    ps = Pseudospectrum(grid_deg=np.arange(7.0), values=values, model_order=2)
    peaks, short = find_peaks(ps, 2)
    assert not short
    assert abs(peaks[0] - 1.0) < 1e-12
    assert abs(peaks[1] - 5.0) < 1e-12  # the value-5.0 neighborhood is blocked; next peak at idx 5

import math

import numpy as np
import pytest

from mmwbeam.beamformers import (
    Beamformer,
    BeamformerPair,
    Constraint,
    RxMode,
    combine_beams,
    dominant_directional_pair,
    egt_rsv_pair,
    matched_filter_rx,
    optimal_pair,
    par,
    phase_only_matched_rx,
    phase_perturbation_study,
    power_split_orthogonal_rx,
    power_split_orthogonal_tx,
    quantize_phases,
    received_snr,
    recursive_phase_pair,
    snr_loss_db,
    two_path_optimal_orthogonal_rx,
    two_path_optimal_orthogonal_tx,
)
from mmwbeam.channel import (
    ArrayGeometry,
    ChannelMatrix,
    PathCluster,
    Scenario,
    beamspace,
    build_channel,
    demo_two_path_scenario,
    sample_scenario,
    steering_vector,
    trial_rng,
)
from mmwbeam.linalg import eigh
from mmwbeam.util import to_db

RX4 = ArrayGeometry(4)
TX64 = ArrayGeometry(64)


def random_scenario(seed, l=2, rx=RX4, tx=TX64):
    return sample_scenario(trial_rng(seed, 0), l, rx, tx)


def rank_one_channel(gain, aoa, aod, rx=RX4, tx=TX64):
    return build_channel(
        Scenario(rx=rx, tx=tx, paths=(PathCluster(gain=gain, aoa_deg=aoa, aod_deg=aod),))
    )


def angle_at_beamspace(omega):
    return math.degrees(math.acos(omega / math.pi))


def orthogonal_pair_angles(rng, geom, lo_deg=30.0, hi_deg=150.0):
    """Two angles whose steering vectors are exactly orthogonal."""
    dlam = geom.spacing_over_wavelength
    lo, hi = beamspace(hi_deg, dlam), beamspace(lo_deg, dlam)
    step = 2 * math.pi / geom.n_elements
    max_m = int((hi - lo) / step)
    m = int(rng.integers(1, max_m + 1))
    w1 = rng.uniform(lo, hi - m * step)
    w2 = w1 + m * step
    return (
        math.degrees(math.acos(w1 / (2 * math.pi * dlam))),
        math.degrees(math.acos(w2 / (2 * math.pi * dlam))),
    )


class TestReceivedSnr:
    def test_rank_one_matched_pair(self):
        h = rank_one_channel(0.7 + 0.2j, 80.0, 100.0)
        pair = BeamformerPair(
            tx=Beamformer(steering_vector(TX64, 100.0), Constraint.EQUAL_GAIN),
            rx=Beamformer(steering_vector(RX4, 80.0), Constraint.EQUAL_GAIN),
        )
        want = 4 * 64 * abs(0.7 + 0.2j) ** 2
        assert received_snr(h, pair, 0.0) == pytest.approx(want)

    def test_invariant_to_rx_scaling(self):
        h = build_channel(random_scenario(1))
        pair = optimal_pair(h)
        scaled = BeamformerPair(
            tx=pair.tx, rx=Beamformer(0.3 * pair.rx.weights, Constraint.ENERGY)
        )
        assert received_snr(h, scaled) == pytest.approx(received_snr(h, pair))

    def test_bounded_by_top_eigenvalue(self):
        for seed in range(20):
            scen = random_scenario(seed)
            h = build_channel(scen)
            top = eigh(h.h.conj().T @ h.h).values[0]
            pair = egt_rsv_pair(h)
            assert received_snr(h, pair) <= top + 1e-9 * top

    def test_zero_rx_rejected(self):
        h = build_channel(random_scenario(2))
        pair = BeamformerPair(
            tx=optimal_pair(h).tx, rx=Beamformer(np.zeros(4), Constraint.ENERGY)
        )
        with pytest.raises(ValueError):
            received_snr(h, pair)


class TestOptimalPair:
    def test_diagonal_channel(self):
        h = ChannelMatrix(h=np.diag([2.0, 1.0]).astype(complex))
        assert received_snr(h, optimal_pair(h)) == pytest.approx(4.0)

    def test_rank_one(self):
        h = rank_one_channel(0.5 - 0.1j, 60.0, 140.0)
        want = 4 * 64 * abs(0.5 - 0.1j) ** 2
        assert received_snr(h, optimal_pair(h)) == pytest.approx(want)

    def test_matches_eigh_oracle(self):
        for seed in range(1000):
            h = build_channel(sample_scenario(trial_rng(100, seed), 2, RX4, TX64))
            top = eigh(h.h.conj().T @ h.h).values[0]
            got = received_snr(h, optimal_pair(h))
            assert abs(got - top) <= 1e-9 * top

    def test_zero_channel_rejected(self):
        with pytest.raises(ValueError):
            optimal_pair(ChannelMatrix(h=np.zeros((2, 2), dtype=complex)))


class TestTwoPathClosedForms:
    def test_orthogonal_tx_matches_svd_optimum(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            aod1, aod2 = orthogonal_pair_angles(rng, TX64)
            aoa1, aoa2 = rng.uniform(30, 150, 2)
            a1, a2 = (complex(*rng.standard_normal(2)) for _ in range(2))
            scen = Scenario(
                rx=RX4,
                tx=TX64,
                paths=(PathCluster(a1, aoa1, aod1), PathCluster(a2, aoa2, aod2)),
            )
            h = build_channel(scen)
            pair = two_path_optimal_orthogonal_tx(
                a1,
                a2,
                steering_vector(RX4, aoa1),
                steering_vector(RX4, aoa2),
                steering_vector(TX64, aod1),
                steering_vector(TX64, aod2),
            )
            best = received_snr(h, optimal_pair(h))
            assert abs(received_snr(h, pair) - best) <= 1e-6 * best

    def test_orthogonal_rx_matches_svd_optimum(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            aoa1, aoa2 = orthogonal_pair_angles(rng, RX4)
            aod1, aod2 = rng.uniform(30, 150, 2)
            a1, a2 = (complex(*rng.standard_normal(2)) for _ in range(2))
            scen = Scenario(
                rx=RX4,
                tx=TX64,
                paths=(PathCluster(a1, aoa1, aod1), PathCluster(a2, aoa2, aod2)),
            )
            h = build_channel(scen)
            pair = two_path_optimal_orthogonal_rx(
                a1,
                a2,
                steering_vector(RX4, aoa1),
                steering_vector(RX4, aoa2),
                steering_vector(TX64, aod1),
                steering_vector(TX64, aod2),
            )
            best = received_snr(h, optimal_pair(h))
            assert abs(received_snr(h, pair) - best) <= 1e-6 * best

    def test_orthogonal_everything_puts_power_on_dominant_path(self):
        assert power_split_orthogonal_tx(2.0, 1.0, 0.0) == pytest.approx(1.0)
        assert power_split_orthogonal_tx(1.0, 2.0, 0.0) == pytest.approx(0.0)
        assert power_split_orthogonal_rx(2.0, 1.0, 0.0) == pytest.approx(1.0)
        assert power_split_orthogonal_rx(1.0, 2.0, 0.0) == pytest.approx(0.0)

    def test_parallel_rx_limit_is_proportional_power(self):
        # beta^2 -> |a1|^2/(|a1|^2+|a2|^2) = 4/5 as the rx overlap -> 1
        for overlap in (0.9, 0.99, 0.999, 1.0):
            split = power_split_orthogonal_tx(2.0, 1.0, overlap)
            if overlap == 1.0:
                assert abs(split - 0.8) < 1e-3
        prev = None
        for overlap in (0.9, 0.99, 0.999, 1.0):
            gap = abs(power_split_orthogonal_tx(2.0, 1.0, overlap) - 0.8)
            if prev is not None:
                assert gap <= prev + 1e-12
            prev = gap

    def test_parallel_tx_limit_is_proportional_squared_power(self):
        # beta^2 -> |a1|^4/(|a1|^4+|a2|^4) = 16/17 as the tx overlap -> 1
        assert abs(power_split_orthogonal_rx(2.0, 1.0, 1.0) - 16.0 / 17.0) < 1e-3
        prev = None
        for overlap in (0.9, 0.99, 0.999, 1.0):
            gap = abs(power_split_orthogonal_rx(2.0, 1.0, overlap) - 16.0 / 17.0)
            if prev is not None:
                assert gap <= prev + 1e-12
            prev = gap

    def test_preconditions_enforced(self):
        v = steering_vector(TX64, 90.0)
        u = steering_vector(RX4, 90.0)
        with pytest.raises(ValueError):
            two_path_optimal_orthogonal_tx(1.0, 1.0, u, u, v, v)
        with pytest.raises(ValueError):
            two_path_optimal_orthogonal_rx(1.0, 1.0, u, u, v, v)


class TestPhaseOnlySchemes:
    def test_egt_exact_when_rsv_is_constant_modulus(self):
        h = rank_one_channel(1.0 + 0j, 80.0, 100.0)
        pair = egt_rsv_pair(h)
        best = received_snr(h, optimal_pair(h))
        assert received_snr(h, pair) == pytest.approx(best)
        assert np.allclose(np.abs(pair.tx.weights), 1 / 8)

    def test_egt_never_beats_energy_optimum(self):
        for seed in range(50):
            h = build_channel(random_scenario(seed))
            assert snr_loss_db(h, egt_rsv_pair(h)) >= -1e-9

    def test_matched_rx_infinity_norm(self):
        # the amplitude-capped matched filter peaks at exactly 1/sqrt(N_r)
        for seed in range(20):
            h = build_channel(random_scenario(seed))
            pair = egt_rsv_pair(h)
            g = pair.rx.weights
            assert np.max(np.abs(g)) == pytest.approx(1 / 2, abs=1e-12)
            assert np.linalg.norm(g) <= 1.0 + 1e-12

    def test_recursive_phase_constant_columns(self):
        h = ChannelMatrix(h=np.ones((3, 5), dtype=complex))
        pair = recursive_phase_pair(h)
        assert np.allclose(pair.tx.weights, np.full(5, 1 / math.sqrt(5)))

    def test_recursive_phase_aligns_rank_one_column_phases(self):
        rng = np.random.default_rng(3)
        base = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi = rng.uniform(0, 2 * np.pi, 6)
        h = ChannelMatrix(h=np.outer(base, np.exp(1j * psi)))
        pair = recursive_phase_pair(h)
        # coherent combining: achieved SNR equals the energy optimum
        best = received_snr(h, optimal_pair(h))
        assert received_snr(h, pair) == pytest.approx(best, rel=1e-9)

    def test_recursive_phase_near_brute_force_at_tiny_arrays(self):
        levels = 64
        phases = 2 * np.pi * np.arange(levels) / levels
        grid = np.array(np.meshgrid(phases, phases, phases, indexing="ij")).reshape(3, -1)
        all_phases = np.vstack([np.zeros(grid.shape[1]), grid])
        candidates = np.exp(1j * all_phases) / 2.0  # 4 x 64^3 equal-gain vectors
        gaps = []
        for seed in range(200):
            scen = sample_scenario(trial_rng(770, seed), 2, RX4, ArrayGeometry(4))
            h = build_channel(scen)
            resp = h.h @ candidates
            brute = float(np.max(np.sum(np.abs(resp) ** 2, axis=0)))
            got = received_snr(h, recursive_phase_pair(h))
            gaps.append(float(to_db(brute) - to_db(got)))
        gaps = np.array(gaps)
        # no worst-case guarantee exists; typical-case closeness is the contract
        assert np.median(gaps) <= 0.1
        assert np.percentile(gaps, 90) <= 0.5


class TestDirectional:
    def test_single_path_equals_optimum(self):
        scen = Scenario(
            rx=RX4, tx=TX64, paths=(PathCluster(0.9 + 0.3j, 77.0, 101.0),)
        )
        h = build_channel(scen)
        for mode in RxMode:
            pair = dominant_directional_pair(h, rx_mode=mode)
            assert snr_loss_db(h, pair) == pytest.approx(0.0, abs=1e-9)

    def test_median_loss_small_for_two_paths(self):
        losses = []
        for seed in range(2000):
            h = build_channel(sample_scenario(trial_rng(200, seed), 2, RX4, TX64))
            losses.append(snr_loss_db(h, dominant_directional_pair(h)))
        assert np.median(losses) < 1.0

    def test_gain_tie_resolves_to_first_path(self):
        scen = Scenario(
            rx=RX4,
            tx=TX64,
            paths=(PathCluster(1.0 + 0j, 70.0, 80.0), PathCluster(1.0 + 0j, 110.0, 120.0)),
        )
        h = build_channel(scen)
        pair = dominant_directional_pair(h)
        assert np.allclose(pair.tx.weights, steering_vector(TX64, 80.0))


class TestCombineAndPar:
    def test_single_beam_passthrough(self):
        f = combine_beams([1.0], [75.0], TX64)
        assert np.allclose(f.weights, steering_vector(TX64, 75.0))

    def test_two_orthogonal_beams_equal_weights(self):
        rng = np.random.default_rng(5)
        aod1, aod2 = orthogonal_pair_angles(rng, TX64)
        f = combine_beams([1.0, 1.0], [aod1, aod2], TX64)
        assert np.linalg.norm(f.weights) == pytest.approx(1.0)
        for ang in (aod1, aod2):
            amp = abs(np.vdot(steering_vector(TX64, ang), f.weights))
            assert amp == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_par_values(self):
        cpo = Beamformer(steering_vector(TX64, 64.0), Constraint.EQUAL_GAIN)
        assert par(cpo) == pytest.approx(1.0)
        e1 = Beamformer(np.array([1.0, 0, 0, 0], dtype=complex), Constraint.ENERGY)
        assert par(e1) == pytest.approx(4.0)

    def test_par_of_combined_orthogonal_beams_n2(self):
        # combining the two orthogonal 2-element beams gives [1, 0]
        geom = ArrayGeometry(2)
        f = combine_beams([1.0, 1.0], [90.0, angle_at_beamspace(math.pi)], geom)
        assert par(f) == pytest.approx(2.0)

    def test_median_par_exceeds_2db_for_eight_antennas(self):
        rng = np.random.default_rng(21)
        geom = ArrayGeometry(8)
        pars = []
        for _ in range(2000):
            w = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / math.sqrt(2)
            angs = rng.uniform(30, 150, 2)
            pars.append(par(combine_beams(w, angs, geom)))
        assert to_db(np.median(pars)) > 2.0

    def test_degenerate_combination_rejected(self):
        with pytest.raises(ValueError):
            combine_beams([1.0, -1.0], [90.0, 90.0], TX64)


class TestQuantization:
    def test_on_grid_phases_unchanged(self):
        phases = 2 * np.pi * np.array([0, 1, 5, 9]) / 16
        f = Beamformer(np.exp(1j * phases) / 2.0, Constraint.EQUAL_GAIN)
        q = quantize_phases(f, 4)
        assert np.allclose(q.weights, f.weights, atol=1e-12)

    def test_nearest_grid_point(self):
        f = Beamformer(np.exp(1j * np.array([0.6 * np.pi])), Constraint.EQUAL_GAIN)
        q = quantize_phases(f, 2)
        assert np.angle(q.weights[0]) == pytest.approx(np.pi / 2)

    def test_median_snr_non_increasing_with_coarseness(self):
        seeds = range(300)
        medians = []
        for bits in (2, 3, 4, 10):
            snrs = []
            for seed in seeds:
                h = build_channel(sample_scenario(trial_rng(300, seed), 2, RX4, TX64))
                pair = egt_rsv_pair(h)
                tx_q = quantize_phases(pair.tx, bits)
                pair_q = BeamformerPair(tx=tx_q, rx=phase_only_matched_rx(h, tx_q))
                snrs.append(received_snr(h, pair_q))
            medians.append(np.median(snrs))
        assert medians[0] <= medians[1] <= medians[2] <= medians[3] + 1e-12

    def test_many_bits_converges_to_unquantized(self):
        diffs = []
        for seed in range(200):
            h = build_channel(sample_scenario(trial_rng(301, seed), 2, RX4, TX64))
            pair = egt_rsv_pair(h)
            tx_q = quantize_phases(pair.tx, 10)
            pair_q = BeamformerPair(tx=tx_q, rx=phase_only_matched_rx(h, tx_q))
            diffs.append(to_db(received_snr(h, pair)) - to_db(received_snr(h, pair_q)))
        assert abs(np.median(diffs)) < 1e-3


class TestPerturbationStudy:
    def test_zero_perturbation_matches_unperturbed(self):
        rows = phase_perturbation_study(demo_two_path_scenario(), [0.0])
        deg, loss_rsv, loss_dir = rows[0]
        assert loss_rsv == pytest.approx(0.0, abs=1e-9)
        h = build_channel(demo_two_path_scenario())
        want = snr_loss_db(h, dominant_directional_pair(h))
        assert loss_dir == pytest.approx(want)

    def test_full_sweep_contrast(self):
        rows = phase_perturbation_study(demo_two_path_scenario(), np.arange(0.0, 360.0, 5.0))
        rsv = np.array([r[1] for r in rows])
        direc = np.array([r[2] for r in rows])
        assert rsv.max() > direc.max()
        assert direc.max() - direc.min() < 1.0
        assert rsv.max() - rsv.min() > 3.0

    def test_requires_two_paths(self):
        scen = Scenario(rx=RX4, tx=TX64, paths=(PathCluster(1.0 + 0j, 90.0, 90.0),))
        with pytest.raises(ValueError):
            phase_perturbation_study(scen, [0.0])


class TestBeamformerValidation:
    def test_equal_gain_magnitudes_enforced(self):
        with pytest.raises(ValueError):
            Beamformer(np.array([1.0, 0.5]), Constraint.EQUAL_GAIN)

    def test_energy_cap_enforced(self):
        with pytest.raises(ValueError):
            Beamformer(np.array([1.0, 1.0]), Constraint.ENERGY)

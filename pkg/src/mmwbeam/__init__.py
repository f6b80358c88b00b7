"""mmwbeam: beamforming strategy comparison for initial user discovery on
millimeter-wave MIMO links.

Submodules:
    linalg           complex SVD / Hermitian eigendecomposition kernel
    channel          ULA steering vectors and sparse multipath synthesis
    beamformers      optimal, phase-only, and directional beamformer catalog
    power_iteration  noisy bi-directional dominant-vector learning
    music            subspace direction learning from pilot snapshots
    codebook         beam broadening, gain bounds, sweep codebooks
    harness          Monte Carlo engine, CCDFs, CSV output
"""
from .channel import (
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
from .beamformers import (
    Beamformer,
    BeamformerPair,
    Constraint,
    RxMode,
    combine_beams,
    dominant_directional_pair,
    egt_rsv_pair,
    optimal_pair,
    par,
    phase_perturbation_study,
    quantize_phases,
    received_snr,
    recursive_phase_pair,
    snr_loss_db,
    two_path_optimal_orthogonal_rx,
    two_path_optimal_orthogonal_tx,
)
from .harness import CcdfCurve, ExperimentConfig, TrialRecord, ccdf, run_experiment

__version__ = "0.1.0"

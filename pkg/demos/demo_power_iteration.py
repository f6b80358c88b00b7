#!/usr/bin/env python3
"""How to spend a fixed pilot budget on noisy bi-directional power iteration.

With 256 pilots total, every split 256 = 2 * n_noise_avg * n_iter is a valid
protocol. At low link SNR, averaging noise before each normalization matters
far more than running extra iterations; this script quantifies that.
"""
import numpy as np

from mmwbeam.harness import ExperimentConfig, losses_of, run_experiment
from mmwbeam.power_iteration import partition_budget

def main():
    budget = 256
    print(f"pilot budget {budget}; valid (n_noise_avg, n_iter) splits:")
    print("  ", partition_budget(budget))
    for rho_db in (-25.0, -10.0):
        print(f"\nrho = {rho_db:+.0f} dB, 800 trials, L=2, 4x64:")
        print(f"{'n_noise_avg':>12s} {'n_iter':>7s} {'median loss':>12s}")
        for n_noi in (4, 8, 16, 32, 64):
            cfg = ExperimentConfig(
                scheme="power-iter",
                n_trials=800,
                master_seed=7,
                l=2,
                rho_forward_db=rho_db,
                rho_reverse_db=rho_db,
                scheme_params={"n_total": budget, "n_noise_avg": n_noi},
            )
            losses = losses_of(run_experiment(cfg))
            print(f"{n_noi:12d} {budget // (2 * n_noi):7d} {np.median(losses):9.2f} dB")

if __name__ == "__main__":
    main()

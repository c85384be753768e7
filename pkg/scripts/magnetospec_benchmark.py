"""E_ST recovery with and without correlated-noise subtraction.

    python3 scripts/magnetospec_benchmark.py --seeds 10 --drift 150e-6
"""
import argparse

import numpy as np

from vsmap.magnetospec import ScanSynthConfig, run_pipeline, synthesize_scans


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--E-ST", type=float, default=50.0, dest="E_ST")
    ap.add_argument("--drift", type=float, default=150e-6, help="common-mode drift amplitude, V")
    ap.add_argument("--fit-T", action="store_true", help="fit the electron temperature as well")
    args = ap.parse_args()

    errs = {True: [], False: []}
    for seed in range(args.seeds):
        cfg = ScanSynthConfig(E_ST=args.E_ST, drift_amplitude=args.drift, seed=seed)
        s01, s12, _ = synthesize_scans(cfg)
        for sub in (True, False):
            r = run_pipeline(s01, s12, noise_subtraction=sub, fit_T=args.fit_T, T=cfg.T)
            errs[sub].append(r.E_ST - args.E_ST)
        print(f"seed {seed:3d}: with {errs[True][-1]:+7.2f} ueV, without {errs[False][-1]:+7.2f} ueV")
    for sub in (True, False):
        e = np.array(errs[sub])
        label = "with subtraction   " if sub else "without subtraction"
        print(f"{label}: RMS {np.sqrt(np.mean(e ** 2)):.2f} ueV, max {np.max(np.abs(e)):.2f} ueV")


if __name__ == "__main__":
    main()

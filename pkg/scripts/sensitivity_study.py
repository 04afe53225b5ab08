"""Relative sensitivity of a probe window as the anomaly share of the scan grows.

    python3 scripts/sensitivity_study.py --seed 0 --out sensitivity.csv
"""
import argparse

from kldfilter.baseline import sensitivity_sweep, write_sweep_csv
from kldfilter.synth import reference_layout


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.005, 0.01, 0.02, 0.05, 0.1])
    ap.add_argument("--out", default="sensitivity.csv")
    args = ap.parse_args()
    reps = sensitivity_sweep(reference_layout(args.seed), args.fractions)
    write_sweep_csv(reps, args.out)
    print(reps[0].probe_description)
    print(f"{'fraction':>9} {'delta_A':>10} {'D(P||Q_A)':>10} {'D(P||Q_N)':>10} {'relative':>9} {'dropped':>9}")
    for r in reps:
        print(f"{r.anomaly_fraction:9.4f} {r.delta_a:10.5f} {r.d_kl_qa:10.5f} {r.d_kl_qn:10.5f} "
              f"{r.relative_sensitivity:9.4f} {r.dropped:9.5f}")


if __name__ == "__main__":
    main()

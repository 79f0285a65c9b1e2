"""Entropic dimension estimates of the operator tensor sets for several norms and dimensions."""

import argparse
import time

from matmart.normed_space import NormSpec, analytic_kappa, entropy_profile, operator_tensor_set


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", nargs="+", default=["l1", "linf", "l2", "l3"])
    ap.add_argument("--dims", nargs="+", type=int, default=[2])
    ap.add_argument("--cloud", type=int, default=2**16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'norm':>6} {'d':>3} {'kappa_hat':>10} {'2(d-1)':>7} {'analytic':>9} {'used':>5} {'secs':>6}")
    for fam in args.families:
        for d in args.dims:
            spec = NormSpec.parse(d, fam)
            start = time.perf_counter()
            try:
                prof = entropy_profile(operator_tensor_set(spec), cloud_size=args.cloud, seed=args.seed)
            except ValueError as exc:
                print(f"{fam:>6} {d:3d}  skipped: {exc}")
                continue
            print(f"{fam:>6} {d:3d} {prof.slope:10.3f} {2 * (d - 1):7d} {analytic_kappa(spec):9.1f} "
                  f"{int(prof.used.sum()):5d} {time.perf_counter() - start:6.2f}")


if __name__ == "__main__":
    main()

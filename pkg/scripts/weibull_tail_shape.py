"""Shape of the normalized-norm tail bound for a weibull_sym model.

-ln(bound) should grow like t^(1 / (delta + 1)).  The bound equals 1 for
every t below inf beta, so the exponent is fitted on windows above it.
"""

import argparse

import numpy as np

from matmart.gls import Conjugate, PsiFunction, fit_power_exponent, log_theorem41_tail
from matmart.mart_sim import MartingaleModel
from matmart.moment_bounds import build_bound_profile
from matmart.normed_space import NormSpec, analytic_kappa
from matmart.verify import model_moment_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=1.0)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--n", type=int, default=25)
    ap.add_argument("--norm", default="l2")
    args = ap.parse_args()
    model = MartingaleModel(args.d, args.n, "weibull_sym", {"delta": args.delta})
    spec = NormSpec.parse(args.d, args.norm)
    bound = build_bound_profile(model_moment_profile(model, spec), analytic_kappa(spec), model.n)
    conj = Conjugate(PsiFunction.from_beta(bound))
    print(f"inf beta = {bound.rho_inf:.4g}; target exponent {1 / (args.delta + 1):.3f}")
    for lo, hi in [(10, 1e3), (1e4, 1e6), (1e6, 1e9), (1e8, 1e12), (1e10, 1e15)]:
        t = np.geomspace(lo, hi, 40)
        lb = log_theorem41_tail(t, None, conj=conj)
        if np.any(lb >= 0):
            print(f"t in [{lo:.0e}, {hi:.0e}]: bound is 1 at {int(np.sum(lb >= 0))}/40 points, no fit")
            continue
        print(f"t in [{lo:.0e}, {hi:.0e}]: exponent {fit_power_exponent(t, -lb)[0]:.4f}")


if __name__ == "__main__":
    main()

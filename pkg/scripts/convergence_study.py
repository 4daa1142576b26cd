"""Compare the spectral and perturbative growing mode over decreasing couplings."""

import argparse
import warnings

from dsrn.background import Background, BlackHoleParams
from dsrn.errors import ConditionsViolated
from dsrn.modes import convergence_study, expected_im_band


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=float, default=1.0)
    ap.add_argument("--Q", type=float, default=0.5)
    ap.add_argument("--Lambda", type=float, default=0.01)
    ap.add_argument("--m0-sq", type=float, default=0.0)
    ap.add_argument("--s", type=float, nargs="+", default=[0.04, 0.02, 0.01, 0.005])
    ap.add_argument("--N", type=int, default=64)
    args = ap.parse_args()

    bg = Background.from_params(BlackHoleParams(args.M, args.Q, args.Lambda))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionsViolated)
        tab = convergence_study(bg, args.m0_sq, sorted(args.s, reverse=True), N=args.N)
    print(f"{'s':>10} {'Re sigma':>15} {'Im sigma':>13} {'|diff|':>11} {'|diff|/s^3':>11} {'Im/lead':>9}")
    for row in tab.rows:
        if not row["ok"]:
            print(f"{row['s']:10.4g}  failed: {row['error']}")
            continue
        z = row["sigma_num"]
        lead = expected_im_band(bg, row["s"], args.m0_sq)
        print(f"{row['s']:10.4g} {z.real:15.8e} {z.imag:13.6e} {row['diff']:11.3e} "
              f"{row['diff_over_s3']:11.5f} {z.imag / lead:9.5f}")
    print("fitted order:", "refused" if tab.order is None else f"{tab.order:.4f}", tab.note)


if __name__ == "__main__":
    main()

"""Im sigma / s^2 of the growing mode along a logarithmic grid of couplings.

Writes a two-column text file (s, Im sigma/s^2) next to the printed table.
"""

import argparse
import warnings

import numpy as np

from dsrn.background import Background, BlackHoleParams
from dsrn.errors import ConditionsViolated, NoConvergence
from dsrn.modes import ModeQuery, find_growing_mode
from dsrn.reduction import im_sigma_plus_leading


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=float, default=1.0)
    ap.add_argument("--Q", type=float, default=0.5)
    ap.add_argument("--Lambda", type=float, default=0.01)
    ap.add_argument("--m0-sq", type=float, default=0.0)
    ap.add_argument("--lo", type=float, default=-3.0, help="log10 of the smallest s")
    ap.add_argument("--hi", type=float, default=-1.3, help="log10 of the largest s")
    ap.add_argument("--num", type=int, default=12)
    ap.add_argument("--out", default="s_scan.dat")
    args = ap.parse_args()

    bg = Background.from_params(BlackHoleParams(args.M, args.Q, args.Lambda))
    lead = im_sigma_plus_leading(bg, args.m0_sq)
    print(f"leading coefficient: {lead:.8e}")
    rows = []
    for s in np.logspace(args.lo, args.hi, args.num):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConditionsViolated)
                res = find_growing_mode(ModeQuery(bg, s, args.m0_sq), N_verify=None,
                                        compute_energy=False, growth_s_threshold=0.0)
        except NoConvergence as exc:
            print(f"{s:10.4e}  failed: {exc}")
            continue
        rows.append((s, res.sigma.imag / s**2))
        print(f"{s:10.4e} {rows[-1][1]:14.8e} {rows[-1][1] / lead:9.5f}")
    np.savetxt(args.out, rows, header="s Im_sigma/s^2")


if __name__ == "__main__":
    main()

"""Minima of the two horizon conditions over astrophysical masses and charges."""

import argparse

from dsrn.background import PhysicalConstants
from dsrn.reduction import physical_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-mass", type=int, default=100)
    ap.add_argument("--n-charge", type=int, default=50)
    ap.add_argument("--mass-max-kg", type=float, default=1.31e41)
    ap.add_argument("--lambda-factor", type=float, default=1.0,
                    help="multiply the cosmological constant (sensitivity probe)")
    args = ap.parse_args()

    base = PhysicalConstants()
    consts = PhysicalConstants(G=base.G, c_light=base.c_light, eps0=base.eps0,
                               Lambda_SI=base.Lambda_SI * args.lambda_factor)
    s = physical_scan(consts, args.n_mass, args.n_charge, args.mass_max_kg)
    print(f"admissible points: {s.n_points}, excluded: {len(s.excluded)}")
    print(f"min r+^4 + r-^4 - 26 r+^2 r-^2 = {s.min_C2:.6e} m^4 at {s.argmin_C2}; "
          f"bound {s.bound_C2:.4g}: {'PASS' if s.pass_C2 else 'FAIL'}")
    print(f"min r+^2 - 2 r+ r- - r-^2      = {s.min_C1:.6e} m^2 at {s.argmin_C1}; "
          f"bound {s.bound_C1:.4g}: {'PASS' if s.pass_C1 else 'FAIL'}")
    print(f"3/Lambda = {3 / consts.Lambda_SI:.6e} m^2 (upper limit for r+^2)")


if __name__ == "__main__":
    main()

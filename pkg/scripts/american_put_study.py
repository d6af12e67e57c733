"""American put: lattice and regression prices against the CRR tree over a range of strikes.

    python3 scripts/american_put_study.py [--M 50000] [--out put.csv]
"""

import argparse
import csv
import sys
import time

from floorop.oracles import binomial_american_put
from floorop.rbsde import price_american


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spot", type=float, default=100.0)
    ap.add_argument("--r", type=float, default=0.05)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--M", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["strike", "crr", "lattice", "lattice_rel", "ensemble", "ensemble_rel", "ensemble_secs"])
    for K in (80.0, 90.0, 100.0, 110.0, 120.0):
        kw = dict(spot=args.spot, strike=K, r=args.r, sigma=args.sigma, T=args.T)
        crr = binomial_american_put(**kw, steps=2000)
        lat = price_american(**kw, N=500)
        t0 = time.perf_counter()
        ens = price_american(**kw, N=25, backend="ensemble", M=args.M, seed=args.seed)
        secs = time.perf_counter() - t0
        w.writerow([K, crr, lat, abs(lat - crr) / crr, ens, abs(ens - crr) / crr, round(secs, 2)])
    if args.out:
        out.close()


if __name__ == "__main__":
    main()

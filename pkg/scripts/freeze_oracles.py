"""Compute the ground-truth oracle values and freeze them into tests/fixtures/oracles.csv.

Run once at build time (and again only when an oracle itself changes):

    python3 scripts/freeze_oracles.py [--out tests/fixtures/oracles.csv]

Only the ``oracles`` module is used here; no solver output is frozen.
"""

import argparse
from pathlib import Path

import numpy as np

from floorop.generators import DISCOUNT, EMU, ZERO
from floorop.oracles import (OracleResult, binomial_american_put, closed_form_linear, exhaustive_expectation,
                             write_fixtures)

ROOT = Path(__file__).resolve().parents[1]

PUT = dict(spot=100.0, strike=100.0, r=0.05, sigma=0.2, T=1.0)
MOMENT_CASES = [(2.0, 1.0), (1.5, 1.0), (2.0, 0.5)]


def put_floor(spot, strike, r, sigma):
    def floor(t, w):
        x = spot * np.exp((r - 0.5 * sigma**2) * t + sigma * w[:, 0])
        return np.maximum(strike - x, 0.0)
    return floor


def build():
    out = []
    out.append(OracleResult("crr_american_put", binomial_american_put(**PUT, steps=500), "tree",
                            {**PUT, "steps": 500}))
    for mu, w, t, T in [(0.0, 0.3, 0.5, 1.0), (1.0, 0.0, 0.0, 1.0), (2.0, -1.0, 1.0, 1.0)]:
        out.append(OracleResult("closed_form_linear", closed_form_linear(mu, t, w, T), "closed_form",
                                {"mu": mu, "w": w, "t": t, "T": T}))

    sq = lambda x: x[:, 0] ** 2           # noqa: E731
    ident = lambda x: x[:, 0]             # noqa: E731
    absv = lambda x: np.abs(x[:, 0])      # noqa: E731
    out.append(OracleResult("exhaustive", exhaustive_expectation(sq, 3, 1.0, ZERO()), "exhaustive",
                            {"claim": "B_T^2", "gen": "zero", "N": 3, "T": 1.0}))
    out.append(OracleResult("exhaustive", exhaustive_expectation(ident, 3, 1.0, EMU(1.0)), "exhaustive",
                            {"claim": "B_T", "gen": "emu(1)", "N": 3, "T": 1.0}))
    for N in (8, 10):
        out.append(OracleResult("exhaustive", exhaustive_expectation(absv, N, 1.0, EMU(1.0)), "exhaustive",
                                {"claim": "|B_T|", "gen": "emu(1)", "N": N, "T": 1.0}))
    for p, mu in MOMENT_CASES:
        y0 = exhaustive_expectation(absv, 8, 1.0, EMU(mu))
        xp = exhaustive_expectation(lambda x, p=p: np.abs(x[:, 0]) ** p, 8, 1.0, ZERO())
        out.append(OracleResult("moment_lhs", y0**p, "exhaustive", {"p": p, "mu": mu, "N": 8, "T": 1.0}))
        out.append(OracleResult("moment_ex_p", xp, "exhaustive", {"p": p, "N": 8, "T": 1.0}))

    spot, strike, r, sigma, T = PUT["spot"], PUT["strike"], PUT["r"], PUT["sigma"], PUT["T"]
    floor = put_floor(spot, strike, r, sigma)
    out.append(OracleResult("exhaustive_put", exhaustive_expectation(lambda x: floor(T, x), 8, T, DISCOUNT(r),
                                                                     floor=floor), "exhaustive",
                            {**PUT, "N": 8, "gen": "discount"}))
    unique = {(r.label, r.params_hash): r for r in out}
    return list(unique.values())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "tests" / "fixtures" / "oracles.csv"))
    args = ap.parse_args()
    results = build()
    write_fixtures(results, args.out)
    for r in results:
        print(f"{r.label:22s} {r.params_hash}  {r.value!r}")


if __name__ == "__main__":
    main()

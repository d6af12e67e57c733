"""Run every axiom check on a panel of operators and print a violation table.

    python3 scripts/axiom_suite.py [--N 6] [--trials 5]

The last row is a deliberately mis-specified operator (driver mu=2 checked
against mu=1); it should fail H1.
"""

import argparse

from floorop.bsde import ClaimError
from floorop.condexp import LatticeBackend
from floorop.generators import EMU, LINEAR, ZERO
from floorop.operators import AXIOMS, DynamicOperator, check_axiom, random_claim
from floorop.paths import TimeGrid
from floorop.rbsde import constant_floor, zero_floor


def panel(be):
    return [
        ("zero", DynamicOperator(be, ZERO())),
        ("linear(1)", DynamicOperator(be, LINEAR(1.0), mu=1.0)),
        ("emu(1)", DynamicOperator(be, EMU(1.0), mu=1.0)),
        ("emu(1), floor 0", DynamicOperator(be, EMU(1.0), zero_floor(), 1.0)),
        ("emu(0.5), floor -1", DynamicOperator(be, EMU(0.5), constant_floor(-1.0, 1.0), 0.5)),
        ("emu(2) as mu=1", DynamicOperator(be, EMU(2.0), mu=1.0)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=6)
    ap.add_argument("--trials", type=int, default=5)
    args = ap.parse_args(argv)

    be = LatticeBackend(TimeGrid(1.0, args.N))
    print(f"{'operator':20s}" + "".join(f"{a:>10s}" for a in AXIOMS))
    for name, op in panel(be):
        cells = []
        for ax in AXIOMS:
            worst, ok = 0.0, True
            try:
                for k in range(args.trials):
                    trial = (random_claim(be, 2 * k, floor=op.floor), random_claim(be, 2 * k + 1))
                    rep = check_axiom(op, ax, trial)
                    worst, ok = max(worst, rep.violation), ok and rep.passed
            except ClaimError:
                # e.g. SANDWICH is only defined for nonnegative claims
                cells.append("n/a")
                continue
            cells.append(f"{worst:.1e}" + ("" if ok else "!"))
        print(f"{name:20s}" + "".join(f"{c:>10s}" for c in cells))
    print("'!' marks a failed check")


if __name__ == "__main__":
    main()

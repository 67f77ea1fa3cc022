"""Stability as the storage coefficient vanishes.

Only the pressure equation carries a time derivative, and its coefficient
s0 may be zero, which turns the stepping system into a pure
differential-algebraic limit.  The saddle-point structure (not s0 > 0) is
what makes each backward-Euler step solvable, so the error tables for
s0 = 0 and s0 = 1e-3 should agree almost entrywise.
"""

import argparse

import numpy as np

from poromix import run_convergence_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()
    refs = [4, 8, 16, 32, 64] if args.full else [4, 8, 16]

    tables = {
        s0: run_convergence_experiment(1, refs, "h2", mu=10, lam=10, s0=s0)
        for s0 in (0.0, 1e-3)
    }
    for s0, table in tables.items():
        print(f"s0 = {s0}:\n")
        print(table.to_markdown())
        print()

    worst = 0.0
    for f in ("sigma", "u", "ustar", "gamma", "z", "p"):
        a = np.asarray(tables[0.0].errors[f])
        b = np.asarray(tables[1e-3].errors[f])
        worst = max(worst, np.abs(a / b - 1.0).max())
    print(f"largest relative deviation between the two tables: {worst:.2e}")


if __name__ == "__main__":
    main()

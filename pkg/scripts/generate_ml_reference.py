#!/usr/bin/env python3
"""Regenerate the frozen Mittag-Leffler acceptance table.

Writes ``tests/data/ml_reference.csv``: 1000 parameter triples with the
function value computed by the big-float series/asymptotic oracle in
``tests/oracles.py`` at 60 working digits, rounded to float64.  The
triples are drawn from a fixed-seed generator so the file is
reproducible: ``alpha`` uniform over the grid 0.1 .. 0.9, ``beta`` one
of ``alpha``, 1, or ``alpha + 1``, and ``z`` uniform in [-100, 0].

The acceptance suite compares the package evaluator against this file
at 1e-10 absolute; regenerating must be a no-op unless the oracle
itself changed.  Requires mpmath; run from the repository root:

    python3 scripts/generate_ml_reference.py
"""

from __future__ import annotations

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
from oracles import ml_oracle  # noqa: E402

SEED = 20260823
COUNT = 1000
OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "data",
                   "ml_reference.csv")


def main() -> int:
    rng = np.random.default_rng(SEED)
    alphas = np.round(0.1 * rng.integers(1, 10, size=COUNT), 1)
    branch = rng.integers(0, 3, size=COUNT)
    zs = -100.0 * rng.random(size=COUNT)

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("alpha,beta,z,value\n")
        for i in range(COUNT):
            a = float(alphas[i])
            b = (a, 1.0, a + 1.0)[branch[i]]
            z = float(zs[i])
            value = float(ml_oracle(a, b, z, dps=60))
            handle.write(f"{a:.17g},{b:.17g},{z:.17g},{value:.17g}\n")
    print(f"wrote {COUNT} rows to {os.path.normpath(OUT)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

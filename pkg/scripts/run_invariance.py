#!/usr/bin/env python3
"""Gibbs-invariance experiment at production scale.

Samples the truncated Gibbs measure, evolves every sample by T under the
Wick-ordered flow, and z-tests all default observables between the two time
slices.  Writes JSON + CSV into --out.
"""

import sys

from wicknlw.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or [
        "--n", "8", "--rho", "1.0", "--m", "1",
        "--T", "1.0", "--dt", "1e-3",
        "--samples", "10000", "--seed", "20260808",
        "--method", "hmc", "--chains", "200", "--burn-in", "400", "--thin", "8",
        "--out", "runs",
    ]
    sys.exit(main(["invariance", *args]))

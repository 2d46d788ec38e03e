#!/usr/bin/env python3
"""Wiener-chaos moment study: Monte Carlo against the convolution oracle,
orthogonality of distinct modes, and the refinement distances d(N)."""

import sys

from wicknlw.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or [
        "--ell-max", "3", "--n-list", "1,4,8",
        "--rho", "1.0", "--t-eval", "0.3", "--eps-reg", "0.25",
        "--samples", "10000", "--seed", "404",
        "--out", "runs",
    ]
    sys.exit(main(["chaos", *args]))

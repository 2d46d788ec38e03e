#!/usr/bin/env python3
"""Weak-universality ladder: rescaled microscopic equations against the
renormalized cubic limit, nested data under one seed."""

import sys

from wicknlw.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or [
        "--eps-list", "0.125,0.0625,0.03125",
        "--rho", "1.0", "--s", "-0.1", "--f", "sin",
        "--T", "0.5", "--dt", "2e-3", "--seed", "909",
        "--out", "runs",
    ]
    sys.exit(main(["universality", *args]))

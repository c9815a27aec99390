#!/usr/bin/env python3
"""Produce the spectral-analysis CSV data sets into results/.

bound-check emits the outlier/iteration-bound table over the tau sweep;
symbol-compare emits matched eigenvalue and symbol-sample columns for the
distribution overlay.  Feed the outputs to the plotting package.
"""

import argparse
import sys

from emisolve.cli import main as cli_main


def run(argv):
    print("+ emisolve " + " ".join(argv))
    code = cli_main(argv)
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results")
    parser.add_argument("--N-bound", type=int, default=16)
    parser.add_argument("--N-symbol", type=int, default=64)
    args = parser.parse_args()

    run(["bound-check", "--N", str(args.N_bound), "--out", args.out])
    run(["symbol-compare", "--N", str(args.N_symbol), "--tau", "1", "--out", args.out])

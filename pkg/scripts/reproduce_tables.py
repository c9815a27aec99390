#!/usr/bin/env python3
"""Reproduce the three benchmark iteration tables into results/.

table1: unpreconditioned CG across (N, tau); table2: multigrid-
preconditioned CG; table3: all solver configurations at N=512, tau=0.01.
Pass --quick to shrink the grids for a fast smoke run.
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
    parser.add_argument("--quick", action="store_true", help="small grids only")
    args = parser.parse_args()

    if args.quick:
        run(["table1", "--N", "32", "--out", args.out])
        run(["table2", "--N", "32", "64", "--out", args.out])
        run(["table3", "--N", "64", "--out", args.out])
    else:
        run(["table1", "--out", args.out])
        run(["table2", "--out", args.out])
        run(["table3", "--out", args.out])

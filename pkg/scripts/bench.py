"""Fit-time scaling of LMDC on BiC and MuC graphs.

    python3 scripts/bench.py --m 10 20 30 50 --upper 5 10 20 30
"""

import argparse
import csv
import sys

from dagchoice.cli import bench_rows
from dagchoice.estimation import FitOptions


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, nargs="+", default=[10, 20, 30, 50])
    p.add_argument("--upper", type=int, nargs="+", default=[5, 10, 20, 30])
    p.add_argument("--n-obs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rows = []
    for m in args.m:
        uppers = [u for u in args.upper if u <= m]
        rows += bench_rows([m], uppers, 0, args.n_obs, ["bic", "muc"], args.seed,
                           FitOptions(compute_se=False))
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)


if __name__ == "__main__":
    main()

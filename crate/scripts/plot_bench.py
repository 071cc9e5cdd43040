#!/usr/bin/env python3
"""Plot mean solve time against matrix size from a `graphsplit bench` run.

Usage: plot_bench.py bench_summary.csv [-o bench.png]

Reads the summary CSV (one row per family and target size) and draws one
log-log line per family.
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    series = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            series[row["family"]].append(
                (int(row["target_nnz"]), float(row["mean_solve_time_s"]) + float(row["mean_setup_time_s"]))
            )
    for pts in series.values():
        pts.sort()
    return series


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("summary", help="<stem>_summary.csv written by graphsplit bench")
    ap.add_argument("-o", "--out", default="bench.png")
    args = ap.parse_args()

    series = load(args.summary)
    if not series:
        raise SystemExit(f"{args.summary}: no rows")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for family, pts in sorted(series.items()):
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=family)
    ax.set_xlabel("nonzeros in A")
    ax.set_ylabel("time (s), setup + solve")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Log-log error plot for a rate-table CSV produced by oldroyd-study.

Usage: python docs/plot_rates.py spatial.csv [out.png]
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(argv):
    if not 1 <= len(argv) <= 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    path = argv[0]
    out = argv[1] if len(argv) > 1 else path.rsplit(".", 1)[0] + ".png"
    with open(path) as fh:
        reader = csv.DictReader(fh)
        res_name = reader.fieldnames[0]
        rows = list(reader)
    res = [float(r[res_name]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    for col, label, marker in (
        ("l2_err", "velocity L2", "o"),
        ("h1_err", "velocity H1", "s"),
        ("p_err", "pressure L2", "^"),
    ):
        ax.loglog(res, [float(r[col]) for r in rows], marker=marker, label=label)
    ax.loglog(res, [res_i * float(rows[0]["l2_err"]) / res[0] for res_i in res],
              "k--", lw=0.8, label="slope 1")
    ax.loglog(res, [res_i**2 * float(rows[0]["l2_err"]) / res[0] ** 2 for res_i in res],
              "k:", lw=0.8, label="slope 2")
    ax.set_xlabel(res_name)
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

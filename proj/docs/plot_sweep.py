#!/usr/bin/env python3
"""Plot rate curves produced by `cvqkd sweep`.

Usage:
    cvqkd sweep --axis distance --start 0 --stop 70 --steps 200 --xi 0 --out solid.csv
    cvqkd sweep --axis distance --start 0 --stop 70 --steps 200 --xi 0.06 --margin --out dashed.csv
    python3 docs/plot_sweep.py solid.csv dashed.csv
"""

import csv
import sys

import matplotlib.pyplot as plt


def load(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    axis = [float(r["axis_value"]) for r in rows]
    return axis, rows


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 7))
    styles = ["-", "--", ":", "-."]
    for i, path in enumerate(sys.argv[1:]):
        axis, rows = load(path)
        ls = styles[i % len(styles)]
        top.plot(axis, [float(r["i_ab"]) for r in rows], "b" + ls,
                 label=f"{path} I_AB")
        top.plot(axis, [float(r["i_be_max"]) for r in rows], "r" + ls,
                 label=f"{path} I_BE")
        bottom.plot(axis, [float(r["delta_i_eff"]) for r in rows], "k" + ls,
                    label=path)
    top.set_ylabel("bits / pulse")
    top.legend(fontsize=7)
    bottom.axhline(0.0, color="0.7", lw=0.8)
    bottom.set_ylabel("net rate, bits / pulse")
    bottom.set_xlabel("distance (km) or gain")
    bottom.set_yscale("symlog", linthresh=1e-3)
    bottom.legend(fontsize=7)
    fig.tight_layout()
    out = "sweep.png"
    fig.savefig(out, dpi=160)
    print("wrote", out)


if __name__ == "__main__":
    main()

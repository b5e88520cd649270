"""Render harness CSV output: MSE versus K_a/K per SNR, or C1e against 2 C1."""
import argparse
import csv
from collections import defaultdict
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_mse(path, out):
    curves = defaultdict(list)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            x = float(Fraction(r["ka_over_k"]))
            curves[(r["scheme"], float(r["snr_db"]))].append((x, float(r["mse_mean"]), float(r["mse_stderr"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    styles = {"original": "o-", "extended": "s-", "enlarged": "^--"}
    for (scheme, snr), pts in sorted(curves.items()):
        pts.sort()
        xs, ys, es = zip(*pts)
        ax.errorbar(xs, ys, yerr=[2 * e for e in es], fmt=styles.get(scheme, "x-"), capsize=3, label=f"{scheme}, {snr:g} dB")
    ax.set_xlabel("K_a / K")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_fig3(path, out):
    with open(path, newline="") as fh:
        rows = [tuple(map(float, r)) for r in list(csv.reader(fh))[1:]]
    snr, c1e, two_c1 = zip(*rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(snr, c1e, label="C1e")
    ax.plot(snr, two_c1, "--", label="2 C1")
    ax.set_xlabel("SNR (dB)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("kind", choices=["mse", "fig3"])
    p.add_argument("csv")
    p.add_argument("-o", "--out", default="plot.png")
    args = p.parse_args(argv)
    (plot_mse if args.kind == "mse" else plot_fig3)(args.csv, args.out)


if __name__ == "__main__":
    main()

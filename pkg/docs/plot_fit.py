"""Example plots for the output directory of the `fit` command.

Usage:
    python docs/plot_fit.py OUTDIR [--save PREFIX]

Reads coefficients.tsv, scales.tsv and diagnostics.tsv and draws a forest
plot of coefficient intervals next to a convergence panel. With --save the
figures go to PREFIX-coefficients.png and PREFIX-diagnostics.png instead
of an interactive window. This script is illustrative and not part of the
tested package surface; adapt freely.
"""
import argparse
import os

import pandas as pd


def load(outdir):
    coefs = pd.read_csv(os.path.join(outdir, "coefficients.tsv"), sep="\t")
    diags = pd.read_csv(os.path.join(outdir, "diagnostics.tsv"), sep="\t")
    return coefs, diags


def forest_plot(ax, coefs, max_rows=40):
    shown = coefs.reindex(coefs["mean"].abs().sort_values(ascending=False).index)
    shown = shown.head(max_rows).iloc[::-1]
    y = range(len(shown))
    ax.hlines(y, shown["lower"], shown["upper"], color="steelblue", lw=2)
    ax.plot(shown["mean"], y, "o", color="navy", ms=4)
    ax.axvline(0.0, color="grey", lw=1, ls=":")
    ax.set_yticks(list(y), shown["coefficient"], fontsize=7)
    ax.set_xlabel("posterior mean and interval")
    ax.set_title(f"largest {len(shown)} coefficients")


def diagnostics_plot(axes, diags):
    ax_rhat, ax_ess = axes
    rhat = pd.to_numeric(diags["rhat"], errors="coerce")
    ax_rhat.plot(rhat.to_numpy(), ".", color="darkorange")
    ax_rhat.axhline(1.01, color="grey", lw=1, ls=":")
    ax_rhat.set_ylabel("split R-hat")
    ax_rhat.set_title("convergence per parameter")
    ax_ess.plot(diags["ess"].to_numpy(), ".", color="seagreen")
    ax_ess.set_ylabel("bulk ESS")
    ax_ess.set_xlabel("parameter index")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir")
    parser.add_argument("--save", help="file prefix; omit to show interactively")
    args = parser.parse_args()

    if args.save:
        import matplotlib

        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    coefs, diags = load(args.outdir)

    fig1, ax = plt.subplots(figsize=(7, 9))
    forest_plot(ax, coefs)
    fig1.tight_layout()

    fig2, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    diagnostics_plot(axes, diags)
    fig2.tight_layout()

    if args.save:
        fig1.savefig(f"{args.save}-coefficients.png", dpi=150)
        fig2.savefig(f"{args.save}-diagnostics.png", dpi=150)
        print(f"wrote {args.save}-coefficients.png and {args.save}-diagnostics.png")
    else:
        plt.show()


if __name__ == "__main__":
    main()

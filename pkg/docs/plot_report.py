"""Example plots for the output directory of the `evaluate` command.

Usage:
    python docs/plot_report.py OUTDIR [--save PREFIX]

Builds four panels from the report tables: per-coefficient rMSE of every
method against the first one, ROC points over the detection threshold
grids, in-bag versus out-of-bag R-squared, and (when present) the
per-covariate coverage quartiles of the attribution intervals. With --save
the figure goes to PREFIX-report.png. This script is illustrative and not
part of the tested package surface; adapt freely.
"""
import argparse
import os

import pandas as pd


def rmse_panel(ax, rmse):
    methods = [c for c in rmse.columns if c != "coefficient"]
    base = methods[0]
    lim = float(rmse[methods].to_numpy().max()) * 1.05
    for other in methods[1:]:
        ax.plot(rmse[other], rmse[base], "o", ms=4, alpha=0.7, label=other)
    ax.plot([0, lim], [0, lim], color="grey", lw=1, ls=":")
    ax.set_xlabel("rMSE of comparison method")
    ax.set_ylabel(f"rMSE of {base}")
    ax.set_title("benchmark deviation per coefficient")
    ax.legend(fontsize=8)


def roc_panel(ax, roc):
    for method, block in roc.groupby("method"):
        block = block.sort_values("specificity")
        ax.plot(
            1.0 - block["specificity"],
            block["sensitivity"],
            "o-",
            ms=4,
            label=method,
        )
    ax.plot([0, 1], [0, 1], color="grey", lw=1, ls=":")
    ax.set_xlabel("1 - specificity")
    ax.set_ylabel("sensitivity")
    ax.set_title("detection over threshold grids")
    ax.legend(fontsize=8)


def r2_panel(ax, r2):
    methods = list(dict.fromkeys(r2["method"]))
    for i, method in enumerate(methods):
        block = r2[r2["method"] == method]
        ax.plot([i - 0.15] * len(block), block["in_bag"], "o", color="navy", ms=4)
        ax.plot([i + 0.15] * len(block), block["out_of_bag"], "o", color="firebrick", ms=4)
    ax.set_xticks(range(len(methods)), methods, fontsize=8)
    ax.set_ylabel("R-squared")
    ax.set_title("in-bag (blue) vs out-of-bag (red)")


def coverage_panel(ax, coverage):
    y = range(len(coverage))
    ax.hlines(y, coverage["q1"], coverage["q3"], color="steelblue", lw=3, alpha=0.6)
    ax.plot(coverage["median"], y, "o", color="navy")
    ax.axvline(0.95, color="grey", lw=1, ls=":")
    ax.set_yticks(list(y), coverage["covariate"], fontsize=8)
    ax.set_xlabel("interval coverage of benchmark attributions")
    ax.set_title("coverage quartiles per covariate")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir")
    parser.add_argument("--save", help="file prefix; omit to show interactively")
    args = parser.parse_args()

    if args.save:
        import matplotlib

        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    read = lambda name: pd.read_csv(os.path.join(args.outdir, name), sep="\t")
    have_coverage = os.path.exists(os.path.join(args.outdir, "coverage.tsv"))

    fig, axes = plt.subplots(2, 2, figsize=(11, 8))
    rmse_panel(axes[0, 0], read("rmse.tsv"))
    roc_panel(axes[0, 1], read("roc.tsv"))
    r2_panel(axes[1, 0], read("r2.tsv"))
    if have_coverage:
        coverage_panel(axes[1, 1], read("coverage.tsv"))
    else:
        axes[1, 1].axis("off")
    fig.tight_layout()

    if args.save:
        fig.savefig(f"{args.save}-report.png", dpi=150)
        print(f"wrote {args.save}-report.png")
    else:
        plt.show()


if __name__ == "__main__":
    main()

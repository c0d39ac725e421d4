"""Example figures from `linkshrink evaluate` and `linkshrink shapley` outputs.

    python docs/plot_results.py evaluate OUT_DIR [--save DIR]
    python docs/plot_results.py shapley SHAPLEY_CSV [--save DIR]
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def block(name):
    if name == "alpha":
        return "intercept"
    return "interaction" if ":" in name else "main"


def plot_evaluate(out):
    rmse = pd.read_csv(out / "rmse.csv")
    rmse["block"] = rmse["coefficient"].map(block)
    roc = pd.read_csv(out / "roc.csv")
    r2 = pd.read_csv(out / "r2.csv")
    figs = {}

    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=False)
    for ax, b in zip(axes, ["main", "interaction"]):
        sub = rmse[rmse["block"] == b]
        methods = list(sub["method"].unique())
        ax.boxplot([sub[sub["method"] == m]["rmse"] for m in methods], tick_labels=methods)
        ax.set_title(f"rMSE, {b} effects")
    figs["rmse"] = fig

    fig, ax = plt.subplots(figsize=(5, 5))
    for m, sub in roc.groupby("method"):
        sub = sub.sort_values("specificity", ascending=False)
        ax.plot(1 - sub["specificity"], sub["sensitivity"], marker="o", label=m)
    ax.plot([0, 1], [0, 1], color="grey", linestyle=":")
    ax.set_xlabel("1 - specificity")
    ax.set_ylabel("sensitivity")
    ax.legend()
    figs["roc"] = fig

    fig, ax = plt.subplots(figsize=(6, 4))
    methods = list(r2["method"].unique())
    pos = range(len(methods))
    ax.boxplot([r2[r2["method"] == m]["in_bag"] for m in methods], positions=[p - 0.2 for p in pos], widths=0.3)
    ax.boxplot([r2[r2["method"] == m]["out_of_bag"] for m in methods], positions=[p + 0.2 for p in pos], widths=0.3)
    ax.set_xticks(list(pos), methods)
    ax.set_title("R², in-bag (left) and out-of-bag (right)")
    figs["r2"] = fig

    cov_path = out / "coverage.csv"
    cov = pd.read_csv(cov_path) if cov_path.exists() else pd.DataFrame()
    if not cov.empty:
        fig, ax = plt.subplots(figsize=(7, 4))
        for m, sub in cov.groupby("method"):
            x = range(len(sub))
            ax.errorbar(x, sub["median"], yerr=[sub["median"] - sub["q1"], sub["q3"] - sub["median"]], fmt="o", label=m)
            ax.set_xticks(list(x), sub["covariate"], rotation=45)
        ax.axhline(0.95, color="grey", linestyle=":")
        ax.set_ylabel("coverage of 95% intervals")
        ax.legend()
        figs["coverage"] = fig
    return figs


def plot_shapley(path):
    shap = pd.read_csv(path)
    order = shap.groupby("covariate")["phi_mean"].apply(lambda v: v.abs().mean()).sort_values().index
    fig, ax = plt.subplots(figsize=(6, 0.4 * len(order) + 1))
    for y, c in enumerate(order):
        sub = shap[shap["covariate"] == c]
        ax.scatter(sub["phi_mean"], [y] * len(sub), s=8, alpha=0.6)
    ax.set_yticks(range(len(order)), order)
    ax.axvline(0, color="grey", linewidth=0.5)
    ax.set_xlabel("posterior mean Shapley value")
    return {"shapley": fig}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("kind", choices=["evaluate", "shapley"])
    ap.add_argument("path", type=Path)
    ap.add_argument("--save", type=Path)
    args = ap.parse_args()
    figs = plot_evaluate(args.path) if args.kind == "evaluate" else plot_shapley(args.path)
    if args.save:
        args.save.mkdir(parents=True, exist_ok=True)
        for name, fig in figs.items():
            fig.tight_layout()
            fig.savefig(args.save / f"{name}.png", dpi=120)
    else:
        plt.show()


if __name__ == "__main__":
    main()

"""Aggregate the experiment CSVs into summary tables and SVG boxplots."""

import os

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _ok(df: pd.DataFrame) -> pd.DataFrame:
    if "error" not in df.columns:
        return df
    return df[df["error"].isna() | (df["error"] == "")]


def _boxplot(groups: dict, title: str, ylabel: str, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    labels = list(groups)
    data = [np.asarray(groups[k], dtype=float) for k in labels]
    data = [d[np.isfinite(d)] for d in data]
    # the paper's plotting convention: points beyond 1.5 IQR are dropped
    ax.boxplot(data, tick_labels=[str(k) for k in labels], whis=1.5, showfliers=False)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def summarize_fd(df: pd.DataFrame) -> pd.DataFrame:
    ok = _ok(df)
    rows = []
    for family, grp in ok.groupby("family"):
        gaps = grp["fd_gap_pct"].astype(float)
        rows.append({
            "family": family,
            "instances": len(grp),
            "mean_gap_pct": gaps.mean(),
            "p25_gap_pct": gaps.quantile(0.25),
            "median_gap_pct": gaps.median(),
            "p75_gap_pct": gaps.quantile(0.75),
            "max_gap_pct": gaps.max(),
            "within_2p5_pct": float((gaps <= 2.5).mean()),
            "budget_violations": int((grp["fd_budget_ok"] == 0).sum()),
        })
    return pd.DataFrame(rows)


def summarize_mle(df: pd.DataFrame) -> pd.DataFrame:
    ok = _ok(df)
    rows = []
    for (family, N), grp in ok.groupby(["family", "N"]):
        rows.append({
            "family": family,
            "N": N,
            "instances": len(grp),
            "mean_ape_pct": grp["ape_pct"].astype(float).mean(),
            "max_ape_pct": grp["ape_pct"].astype(float).max(),
            "mean_opt_gap_pct": grp["opt_gap_pct"].astype(float).mean(),
            "underestimated_frac": float((grp["underestimated"] == 1).mean()),
            "profit_pred_loss_count": int((grp["profit_pred_loss_real"] == 1).sum()),
            "theta0_in_region_frac": float((grp["theta0_in_region"] == 1).mean()),
        })
    return pd.DataFrame(rows)


def summarize_dro(df: pd.DataFrame) -> pd.DataFrame:
    ok = _ok(df)
    rows = []
    for (family, T, M), grp in ok.groupby(["family", "T", "M"]):
        rows.append({
            "family": family,
            "T": T,
            "M": M,
            "instances": len(grp),
            "worst_case_found_pct": 100.0 * float((grp["cs_found_worst"] == 1).mean()),
            "mean_omega_gap_pct": grp["omega_gap_pct"].astype(float).mean(),
            "mean_q_gap_pct": grp["q_gap_pct"].astype(float).mean(),
            "mean_abs_q_gap_pct": grp["q_gap_pct"].astype(float).abs().mean(),
            "mean_cs_iters": grp["cs_iters"].astype(float).mean(),
            "mean_set_size": grp["set_size"].astype(float).mean(),
            "timed_out": int((grp["cs_timed_out"] == 1).sum()
                             + (grp["full_timed_out"] == 1).sum()),
        })
    return pd.DataFrame(rows)


def write_report(results_dir: str, out_dir: str | None = None) -> dict:
    """Summaries and figures from a run_matrix output directory."""
    out_dir = out_dir or results_dir
    os.makedirs(out_dir, exist_ok=True)
    fd = pd.read_csv(os.path.join(results_dir, "fd_vs_ref.csv"))
    mle = pd.read_csv(os.path.join(results_dir, "mle_eval.csv"))
    dro = pd.read_csv(os.path.join(results_dir, "dro_eval.csv"))

    tables = {
        "summary_fd": summarize_fd(fd),
        "summary_mle": summarize_mle(mle),
        "summary_dro": summarize_dro(dro),
    }
    paths = {}
    for name, table in tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        table.to_csv(path, index=False)
        paths[name] = path

    fd_ok, mle_ok, dro_ok = _ok(fd), _ok(mle), _ok(dro)
    figures = {
        "fd_gap_box": ("FD optimality gap vs exact reference", "gap (%)",
                       {fam: grp["fd_gap_pct"] for fam, grp in fd_ok.groupby("family")}),
        "mle_ape_by_N": ("MLE cost estimate APE by sample size", "APE (%)",
                         {N: grp["ape_pct"] for N, grp in mle_ok.groupby("N")}),
        "dro_omega_gap_by_M": ("CS omega-gap by grid density M", "omega-gap (%)",
                               {M: grp["omega_gap_pct"]
                                for M, grp in dro_ok.groupby("M")}),
        "dro_q_gap_by_M": ("CS q-gap vs full solve by grid density M", "q-gap (%)",
                           {M: grp["q_gap_pct"] for M, grp in dro_ok.groupby("M")}),
    }
    for name, (title, ylabel, groups) in figures.items():
        if not groups:
            continue
        path = os.path.join(out_dir, f"{name}.svg")
        _boxplot(groups, title, ylabel, path)
        paths[name] = path

    lines = ["experiment report", "=" * 18, ""]
    for name in ("summary_fd", "summary_mle", "summary_dro"):
        lines.append(name)
        lines.append(tables[name].to_string(index=False))
        lines.append("")
    mle_all = _ok(mle)
    if len(mle_all):
        lines.append(f"overall MLE underestimation fraction: "
                     f"{float((mle_all['underestimated'] == 1).mean()):.3f}")
        lines.append(f"profit-predicted/loss-realized instances: "
                     f"{int((mle_all['profit_pred_loss_real'] == 1).sum())}")
    dro_all = _ok(dro)
    if len(dro_all):
        lines.append(f"overall CS worst-case hit rate: "
                     f"{100.0 * float((dro_all['cs_found_worst'] == 1).mean()):.2f}%")
    summary_path = os.path.join(out_dir, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    paths["summary"] = summary_path
    return paths

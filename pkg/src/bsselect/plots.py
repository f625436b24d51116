"""Render sweep results to figure files next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_LABELS = {
    "exhaustive_sinr": "exhaustive SINR search",
    "greedy_slnr": "greedy SLNR",
    "greedy_laslnr": "greedy LASLNR",
    "largest_energy": "largest channel energy",
    "random": "random",
}

_AXIS_LABELS = {
    "per_user_power_dB": "per-user transmit power [dB]",
    "num_clusters": "number of clusters",
}


def render_results(rows, path) -> None:
    """Mean sum-rates versus the sweep variable, one line per algorithm.

    Left panel: system sum-rate; right panel: per-cluster sum-rate. Error
    bars show one standard error.
    """
    if not rows:
        return
    sweep_var = rows[0].sweep_var
    by_algorithm: dict = {}
    for row in rows:
        by_algorithm.setdefault(row.algorithm, []).append(row)

    fig, (ax_total, ax_cluster) = plt.subplots(1, 2, figsize=(10.5, 4.2))
    for name, algo_rows in by_algorithm.items():
        algo_rows = sorted(algo_rows, key=lambda r: r.sweep_value)
        x = [r.sweep_value for r in algo_rows]
        label = _LABELS.get(name, name)
        ax_total.errorbar(x, [r.mean_sum_rate for r in algo_rows],
                          yerr=[r.stderr for r in algo_rows],
                          marker="o", capsize=3, label=label)
        # per-cluster stderr scales by the same 1/C factor as the mean
        pc_err = [
            r.stderr * (r.mean_per_cluster_rate / r.mean_sum_rate)
            if r.mean_sum_rate > 0 else 0.0
            for r in algo_rows
        ]
        ax_cluster.errorbar(x, [r.mean_per_cluster_rate for r in algo_rows],
                            yerr=pc_err, marker="o", capsize=3, label=label)
    for ax, ylabel in ((ax_total, "system sum-rate [bits/s/Hz]"),
                       (ax_cluster, "sum-rate per cluster [bits/s/Hz]")):
        ax.set_xlabel(_AXIS_LABELS.get(sweep_var, sweep_var))
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
    ax_total.legend(fontsize=8)
    fig.suptitle(f"category: {rows[0].category}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

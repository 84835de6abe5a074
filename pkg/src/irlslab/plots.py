"""Render experiment reports to figure files next to their CSV output."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .solver import DDFG, MODIFIED  # noqa: E402

_COLORS = {DDFG: "tab:red", MODIFIED: "tab:blue"}
_DPI = 150


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def _plot_e1(report, out: Path) -> list[Path]:
    paths = []
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, trace in report.traces.items():
        ax.semilogy(trace.n, trace.eps, color=_COLORS[variant], label=variant)
    if report.oracle is not None:
        n = np.arange(report.oracle.eps.shape[0])
        ax.semilogy(n, report.oracle.eps, "k--", lw=0.8, label="scalar oracle")
    ax.set_xlabel("iteration n")
    ax.set_ylabel(r"smoothing parameter $\epsilon_n$")
    ax.legend()
    ax.grid(alpha=0.3)
    paths.append(_save(fig, out / "fig_eps.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, trace in report.traces.items():
        ax.semilogy(trace.n, trace.err2, color=_COLORS[variant], label=variant)
    ax.set_xlabel("iteration n")
    ax.set_ylabel(r"$\|x^n - x^*\|_2$")
    ax.legend()
    ax.grid(alpha=0.3)
    paths.append(_save(fig, out / "fig_err.png"))
    return paths


def _plot_scatter(report, out: Path, value_key: str, ylabel: str, fname: str, ytransform) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    for row in report.rows:
        n = (
            row.iterations_to_success
            if row.iterations_to_success is not None
            else row.iterations_run
        )
        ok = row.success
        ax.scatter(
            max(n, 1),
            ytransform(row.cell[value_key]),
            marker="o" if ok else "x",
            color="tab:green" if ok else "tab:red",
            s=18,
        )
    ax.set_xscale("log")
    ax.set_xlabel("iterations (to success, or run length on failure)")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    fig.text(0.01, 0.01, "o success   x failure", fontsize=8)
    return [_save(fig, out / fname)]


def _plot_e4(report, out: Path) -> list[Path]:
    Ks = list(report.params["Ks"])
    gammas = list(report.params["gammas"])
    rates = {}
    for agg in report.aggregate():
        rates[(agg["K"], agg["gamma"], agg["variant"])] = agg["success_rate"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, variant in zip(axes, (DDFG, MODIFIED)):
        grid = np.array(
            [[rates.get((K, g, variant), math.nan) for K in Ks] for g in gammas]
        )
        im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="RdYlGn", aspect="auto")
        ax.set_xticks(range(len(Ks)), [str(K) for K in Ks])
        ax.set_yticks(range(len(gammas)), [str(g) for g in gammas])
        ax.set_xlabel("K")
        ax.set_title(variant)
        for i in range(len(gammas)):
            for j in range(len(Ks)):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", fontsize=8)
    axes[0].set_ylabel("gamma")
    fig.colorbar(im, ax=axes, shrink=0.8, label="success rate")
    fig.savefig(out / "fig_success_grid.png", dpi=_DPI)
    plt.close(fig)
    return [out / "fig_success_grid.png"]


def _plot_e5(report, out: Path) -> list[Path]:
    from .experiments import recovery_statistics

    stats = recovery_statistics(report)
    paths = []
    fig, ax = plt.subplots(figsize=(6, 4))
    styles = {DDFG: "--", MODIFIED: "-"}
    for key, curve in stats.items():
        sparsity, variant = key
        ax.step(
            curve.iterations,
            curve.fraction,
            styles[variant],
            color=_COLORS[variant],
            alpha=0.9,
            label=f"{variant}, k={sparsity}",
        )
    ax.set_xlim(0, max(c.iterations[-1] for c in stats.values()))
    ax.set_xlabel("iteration n")
    ax.set_ylabel("fraction of trials recovered")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    paths.append(_save(fig, out / "fig_recovery.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    for key, curve in stats.items():
        sparsity, variant = key
        if curve.avg_err is None:
            continue
        ax.semilogy(
            curve.iterations,
            np.maximum(curve.avg_err, 1e-16),
            styles[variant],
            color=_COLORS[variant],
            label=f"{variant}, k={sparsity}",
        )
    ax.set_xlabel("iteration n")
    ax.set_ylabel("mean $\\|x^n - x^*\\|_2$")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    paths.append(_save(fig, out / "fig_avg_error.png"))
    return paths


def render_report(report, out_dir) -> list[Path]:
    """Write the figures for one experiment report; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if report.experiment == "E1":
        return _plot_e1(report, out)
    if report.experiment == "E2":
        return _plot_scatter(
            report,
            out,
            "gamma",
            r"$-\log_{10}(1-\gamma)$",
            "fig_gamma_sensitivity.png",
            lambda g: -math.log10(1.0 - g),
        )
    if report.experiment == "E3":
        return _plot_scatter(
            report,
            out,
            "sigma",
            r"$-\log_{10}(\sigma)$",
            "fig_perturbation.png",
            lambda s: -math.log10(s),
        )
    if report.experiment == "E4":
        return _plot_e4(report, out)
    if report.experiment == "E5":
        return _plot_e5(report, out)
    raise ValueError(f"no renderer for experiment {report.experiment!r}")

"""PNG figures for CLI runs. Each function takes plain arrays and writes one file."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}

STATUS_COLORS = {"Converged": "tab:blue", "NoSolutionEvidence": "tab:red", "Stalled": "tab:orange",
                 "Diverged": "tab:purple"}
VERDICT_CODES = {"Unsolvable": 0, "Unresolved": 1, "Solvable": 2}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _axes():
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    ax.grid(True, alpha=0.3)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    return fig, ax


def profile(path, x, u, title="", xlabel="x", ylabel="u") -> None:
    fig, ax = _axes()
    ax.plot(x, u, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    _save(fig, path)


def sweep(path, values, sup_norms, statuses, param="lambda") -> None:
    fig, ax = _axes()
    values, sup_norms = np.asarray(values, float), np.asarray(sup_norms, float)
    ok = np.isfinite(sup_norms) & (sup_norms > 0)
    ax.plot(values[ok], sup_norms[ok], color="0.6", lw=0.8)
    for status in sorted(set(statuses)):
        sel = np.array([s == status for s in statuses]) & ok
        if sel.any():
            ax.scatter(values[sel], sup_norms[sel], s=14, color=STATUS_COLORS.get(status, "k"), label=status)
        missing = np.array([s == status for s in statuses]) & ~ok
        for v in values[missing]:
            ax.axvline(v, color=STATUS_COLORS.get(status, "k"), lw=0.6, ls=":")
    ax.set_yscale("log")
    ax.set_xlabel(param)
    ax.set_ylabel("sup |u|")
    ax.legend()
    _save(fig, path)


def bracket(path, history, lo, hi, param="lambda", reference=None) -> None:
    fig, ax = _axes()
    for k, (value, status) in enumerate(history):
        ax.scatter(k, value, s=16, color=STATUS_COLORS.get(status, "k"))
    ax.axhspan(lo, hi, color="tab:green", alpha=0.2, label="final bracket")
    if reference is not None:
        ax.axhline(reference, color="k", lw=0.8, ls="--", label="closed form")
    ax.set_xlabel("probe")
    ax.set_ylabel(param)
    ax.legend()
    _save(fig, path)


def atlas(path, lam_grid, mu_grid, verdicts) -> None:
    lam_grid, mu_grid = np.asarray(lam_grid, float), np.asarray(mu_grid, float)
    codes = np.array([VERDICT_CODES[v] for v in verdicts], float).reshape(lam_grid.size, mu_grid.size)
    fig, ax = _axes()
    cmap = matplotlib.colors.ListedColormap(["tab:red", "0.8", "tab:blue"])
    ax.imshow(codes.T, origin="lower", cmap=cmap, vmin=0, vmax=2, aspect="auto",
              extent=(-0.5, lam_grid.size - 0.5, -0.5, mu_grid.size - 0.5))
    ax.set_xticks(range(lam_grid.size), [f"{v:.3g}" for v in lam_grid], rotation=45)
    ax.set_yticks(range(mu_grid.size), [f"{v:.3g}" for v in mu_grid])
    ax.set_xlabel("lambda")
    ax.set_ylabel("mu")
    ax.grid(False)
    handles = [matplotlib.patches.Patch(color=c, label=name)
               for name, c in (("Solvable", "tab:blue"), ("Unresolved", "0.8"), ("Unsolvable", "tab:red"))]
    ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.0, 1.0))
    _save(fig, path)


def curves(path, x, fields, labels, xlabel="x", ylabel="u", logy=False) -> None:
    fig, ax = _axes()
    for u, label in zip(fields, labels):
        ax.plot(x, u, lw=1.0, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    _save(fig, path)


def fold(path, lambdas, counts, lambda0=None, lambda1=None) -> None:
    fig, ax = _axes()
    ax.step(lambdas, counts, where="post", lw=1.0)
    ax.scatter(lambdas, counts, s=10)
    for b, name in ((lambda0, "lambda0"), (lambda1, "lambda1")):
        if b is not None:
            ax.axvspan(b[0], b[1], color="tab:green", alpha=0.3, label=name)
    ax.set_xscale("log")
    ax.set_yticks([0, 1, 2])
    ax.set_xlabel("lambda")
    ax.set_ylabel("positive solutions")
    ax.legend()
    _save(fig, path)


def loglog_fit(path, d, u, sigma, constant, window) -> None:
    fig, ax = _axes()
    d, u = np.asarray(d, float), np.asarray(u, float)
    ok = (d > 0) & (u > 0)
    ax.loglog(d[ok], u[ok], ".", ms=2, color="0.4", label="solution")
    t = np.geomspace(window[0], window[1], 50)
    ax.loglog(t, constant * t**sigma, color="tab:red", lw=1.0, label=f"fit, slope {sigma:.4f}")
    ax.axvspan(window[0], window[1], color="tab:green", alpha=0.1)
    ax.set_xlabel("distance to boundary")
    ax.set_ylabel("u")
    ax.legend()
    _save(fig, path)


def refinement(path, x, y, xlabel, ylabel, slope=None) -> None:
    fig, ax = _axes()
    ax.loglog(x, y, "o-", ms=4)
    if slope is not None:
        ax.set_title(f"log-log slope {slope:.4f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    _save(fig, path)


def integrability(path, node_counts, series: dict) -> None:
    fig, ax = _axes()
    for label, values in series.items():
        ax.loglog(node_counts, values, "o-", ms=3, label=label)
    ax.set_xlabel("nodes")
    ax.set_ylabel("integral of phi^-s")
    ax.legend(ncol=2)
    _save(fig, path)

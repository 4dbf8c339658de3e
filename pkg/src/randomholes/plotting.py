"""Figure rendering for the CLI report path.

Every analysis subcommand that produces curve- or density-shaped data
renders a PNG next to its CSV.  Figures are plain matplotlib; the Agg
backend keeps headless runs working.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _step_from_intervals(ax, intervals, values, **kw):
    xs, ys = [], []
    for (lo, hi), v in zip(intervals, values):
        xs.extend([lo, hi])
        ys.extend([v, v])
    ax.plot(xs, ys, **kw)


def plot_spectrum(intervals, rho, alpha_density, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    _step_from_intervals(ax, intervals, rho, label=r"eigenfunction $\hat\rho$")
    _step_from_intervals(ax, intervals, alpha_density, ls="--",
                         label=r"$\hat\alpha$ density")
    ax.set_xlabel("x")
    ax.set_xlim(0, 1)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_survival(curve, lam_hat, counts, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ns = np.arange(len(curve))
    alive = np.asarray(curve)
    pos = alive > 0
    ax1.semilogy(ns[pos], alive[pos], "o", ms=3, label="empirical")
    if lam_hat is not None and 0 < lam_hat <= 1:
        ax1.semilogy(ns, lam_hat**ns, "-", lw=1,
                     label=r"$\hat\lambda^{\,n}$")
    ax1.set_xlabel("n")
    ax1.set_ylabel("alive fraction")
    ax1.legend(frameon=False)

    taus = np.arange(len(counts))
    nz = counts > 0
    ax2.bar(taus[nz], counts[nz], width=0.9)
    ax2.set_xlabel(r"survival time $\tau$")
    ax2.set_ylabel("count")
    ax2.set_xlim(-0.5, max(taus[nz]) + 0.5 if np.any(nz) else 1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_survivor_nodes(nodes, forbidden, path):
    fig, ax = plt.subplots(figsize=(6, 1.8))
    for lo, hi in forbidden:
        ax.axvspan(lo, hi, color="tab:red", alpha=0.25, lw=0)
    for c in nodes:
        ax.plot([c.lo, c.hi], [0, 0], lw=6, color="tab:blue",
                solid_capstyle="butt")
    ax.set_xlim(0, 1)
    ax.set_yticks([])
    ax.set_xlabel("surviving cylinders (red: forbidden region)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_dimension_spectrum(curve, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(curve.ts, curve.T, "o-", ms=3, label="T(t)")
    ax.plot(curve.ts, curve.dims, "s--", ms=3, label="T(t) + t T'(t)")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_gibbs(constants, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ns = sorted(constants)
    ax.plot(ns, [constants[n] for n in ns], "o-", ms=4)
    ax.set_xlabel("cylinder length n")
    ax.set_ylabel("Gibbs constant $C_n$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

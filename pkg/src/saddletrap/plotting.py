"""Static figures written next to the CSV output of the command-line tool."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
}


def _save(fig, path):
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_trajectory(x, u, path, title=None):
    """Trajectory, its guiding center, and the two superposed (three panels)."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.1), sharex=True, sharey=True)
        axes[0].plot(x[:, 0], x[:, 1], lw=0.5, color="0.2")
        axes[0].set_title("trajectory x")
        if u is not None:
            axes[1].plot(u[:, 0], u[:, 1], lw=0.8, color="C3")
            axes[2].plot(x[:, 0], x[:, 1], lw=0.4, color="0.5")
            axes[2].plot(u[:, 0], u[:, 1], lw=0.8, color="C3")
        axes[1].set_title("guiding center u")
        axes[2].set_title("superposition")
        for ax in axes:
            ax.set_aspect("equal")
            ax.set_xlabel("$x_1$")
        axes[0].set_ylabel("$x_2$")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_residual(epsilons, residuals, slope, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.0))
        e = np.asarray(epsilons)
        r = np.asarray(residuals)
        ax.loglog(e, r, "o", color="C0", label="max residual")
        ref = r[0] * (e / e[0]) ** 4
        ax.loglog(e, ref, "--", color="0.5", label=r"$\propto\varepsilon^4$")
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("residual")
        ax.set_title(f"fitted slope {slope:.3f}")
        ax.legend()
        return _save(fig, path)


def plot_stability(epsilons, moduli, eps_c, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        ax.semilogy(epsilons, moduli, ".-", color="C0")
        ax.axvline(eps_c, color="C3", lw=0.8, ls="--", label=rf"$\varepsilon_c$ = {eps_c:.4f}")
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("max |Floquet multiplier|")
        ax.legend()
        return _save(fig, path)


def plot_precession(t, u, path, rate):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.4))
        ax.plot(u[:, 0], u[:, 1], lw=0.5, color="C3")
        ax.set_aspect("equal")
        ax.set_title(f"precession rate {rate:.4g}")
        ax.set_xlabel("$u_1$")
        ax.set_ylabel("$u_2$")
        return _save(fig, path)

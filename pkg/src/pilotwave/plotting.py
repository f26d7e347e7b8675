"""PNG figures for the preset bundles (Agg backend, no display needed)."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def oscillator_figures(plots, out_dir, a1=1.0):
    paths = []
    q0 = plots.get("initial")
    if q0 is not None and "Q1" in plots["time_means"]:
        fig, ax = plt.subplots(figsize=(5.5, 4))
        ax.plot(q0[:, 0], plots["time_means"]["Q1"], ".", ms=3, label="time mean per member")
        xs = np.linspace(q0[:, 0].min(), q0[:, 0].max(), 2)
        ax.plot(xs, xs - a1, "k--", lw=1, label="Q1(0) - a1")
        ax.axhline(plots["space_means"]["Q1"], color="C3", lw=1, label="time-averaged space mean")
        ax.set_xlabel("Q1(0)")
        ax.set_ylabel("time mean of Q1")
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir, "time_means.png"))
    if "trajectory" in plots:
        t, q = plots["trajectory"]
        sel = t <= t[0] + 8.0 * np.pi
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(t[sel], q[sel, 0], label="Q1")
        ax.plot(t[sel], q[sel, 1], label="Q2")
        ax.set_xlabel("t")
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir, "trajectory.png"))
    return paths


def interferometer_figures(plots, out_dir):
    paths = []
    d1, d2 = plots["regions"]
    a = plots["params"].a
    if plots.get("paths") is not None:
        times, p = plots["paths"]
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for i in range(p.shape[0]):
            ax.plot(p[i, :, 0], p[i, :, 1], color="C0", lw=0.7)
            ax.plot(p[i, :, 2], p[i, :, 3], color="C1", lw=0.7)
        ax.plot([d1.x0, d1.x0], [d1.y_min, d1.y_max], color="C2", lw=4, label="D1")
        ax.plot([d2.x0 + 0.3, d2.x0 + 0.3], [d2.y_min, d2.y_max], color="C3", lw=4, label="D2")
        ax.plot([0, 0], [a, -a], "ko", ms=3)
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir, "pair_trajectories.png"))
    y = plots["y_cross"]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    bins = np.linspace(-12, 12, 97)
    for i, label in ((0, "particle 1"), (1, "particle 2")):
        v = y[:, i][np.isfinite(y[:, i])]
        ax.hist(v, bins=bins, histtype="step", label=label)
    for d, c in ((d1, "C2"), (d2, "C3")):
        ax.axvspan(d.y_min, d.y_max, color=c, alpha=0.2)
    ax.set_xlabel("y at first crossing of x = x0")
    ax.set_ylabel("members")
    ax.legend(fontsize=8)
    paths.append(_save(fig, out_dir, "crossings.png"))
    return paths


def torus_figures(plots, out_dir):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for case, orbit in plots.items():
        ax.step(orbit.coverage_times, orbit.coverage, where="post",
                label=f"{case}: w2/w1 = {orbit.omega[1] / orbit.omega[0]:.6g}")
    ax.set_xscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("fraction of torus cells visited")
    ax.legend(fontsize=8)
    paths = [_save(fig, out_dir, "coverage.png")]
    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    for ax, (case, orbit) in zip(axes, plots.items()):
        th = orbit.theta[:: max(1, orbit.theta.shape[0] // 20000)]
        ax.plot(th[:, 0], th[:, 1], ",", color="C0")
        ax.set_title(case, fontsize=9)
        ax.set_xlim(0, 2 * np.pi)
        ax.set_ylim(0, 2 * np.pi)
        ax.set_xlabel("theta1")
    axes[0].set_ylabel("theta2")
    paths.append(_save(fig, out_dir, "torus.png"))
    return paths


def spectral_figures(plots, out_dir):
    rows = plots["rows"]
    fig, ax = plt.subplots(figsize=(5, 4))
    dev = np.maximum(rows[:, 4], 1e-17)
    ax.loglog(rows[:, 5], dev, ".", label="systems")
    lim = [rows[:, 5].min() * 0.5, rows[:, 5].max() * 2]
    ax.plot(lim, lim, "k--", lw=1, label="bound 5 / (T min gap)")
    ax.set_xlabel("bound")
    ax.set_ylabel("|Cesaro - closed form|")
    ax.legend(fontsize=8)
    return [_save(fig, out_dir, "spectral.png")]


def render(bundle, out_dir):
    """Draw the figures of ``bundle`` into ``out_dir``; returns file paths."""
    os.makedirs(out_dir, exist_ok=True)
    if bundle.preset == "oscillator-nonergodic":
        return oscillator_figures(bundle.plots, out_dir, bundle.config["a1"])
    if bundle.preset == "interferometer-incompatibility":
        return interferometer_figures(bundle.plots, out_dir)
    if bundle.preset == "classical-torus":
        return torus_figures(bundle.plots, out_dir)
    return spectral_figures(bundle.plots, out_dir)

"""SVG rendering of sweep results, training curves and trajectory replays.

Output is deterministic for identical input (fixed hash salt, no date stamp),
so rendered files can be diffed and parsed in tests. Each plotted series
carries a ``gid`` so its coordinates can be located in the emitted SVG.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Rectangle  # noqa: E402

from .env import EnvConfig  # noqa: E402
from .evaluate import CellResult, Trajectory  # noqa: E402

PLOT_KINDS = ("unbiased", "bias_only", "biased", "train")
_SVG_META = {"Date": None, "Creator": None}


class EmptyInputError(ValueError):
    pass


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "uavnav", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _by_denoiser(results):
    groups = defaultdict(list)
    for r in results:
        groups[r.denoiser].append(r)
    return dict(sorted(groups.items()))


def success_curve(results: list[CellResult], axis: str, path, title: str = "") -> Path:
    """Success rate against ``axis`` ('sigma' or 'mu'), one series per denoiser."""
    if not results:
        raise EmptyInputError("no result rows to plot")
    if axis not in ("mu", "sigma"):
        raise ValueError(f"axis must be 'mu' or 'sigma', got {axis!r}")
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rows in _by_denoiser(results).items():
        rows = sorted(rows, key=lambda r: getattr(r, axis))
        xs = [getattr(r, axis) for r in rows]
        ys = [r.success_rate for r in rows]
        ax.plot(xs, ys, marker="o", ms=3, label=name, gid=f"series-{name}")
    ax.set_xlabel("noise std σ" if axis == "sigma" else "noise mean μ")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(title="denoiser")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def success_heatmap(results: list[CellResult], path, title: str = "") -> Path:
    """μ on the vertical axis, σ on the horizontal; one panel per denoiser."""
    if not results:
        raise EmptyInputError("no result rows to plot")
    groups = _by_denoiser(results)
    fig, axes = plt.subplots(1, len(groups), figsize=(5.5 * len(groups), 4.5), squeeze=False)
    for ax, (name, rows) in zip(axes[0], groups.items()):
        mus = sorted({r.mu for r in rows})
        sigmas = sorted({r.sigma for r in rows})
        grid = np.full((len(mus), len(sigmas)), np.nan)
        for r in rows:
            grid[mus.index(r.mu), sigmas.index(r.sigma)] = r.success_rate
        dm = (mus[1] - mus[0]) / 2 if len(mus) > 1 else 0.5
        ds = (sigmas[1] - sigmas[0]) / 2 if len(sigmas) > 1 else 0.5
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="coolwarm", vmin=0.0, vmax=1.0,
                       extent=(sigmas[0] - ds, sigmas[-1] + ds, mus[0] - dm, mus[-1] + dm), gid=f"heatmap-{name}")
        ax.set_xlabel("noise std σ")
        ax.set_ylabel("noise mean μ")
        ax.set_title(f"{title} ({name})" if title else name)
        fig.colorbar(im, ax=ax, label="success rate")
    fig.tight_layout()
    return _save(fig, path)


def read_trainlog(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows or "mean100_return" not in rows[0]:
        raise EmptyInputError(f"{path}: no training log rows")
    return {k: np.array([float(r[k]) if r[k] != "" else np.nan for r in rows]) for k in rows[0]}


def training_curves(log: dict[str, np.ndarray], path) -> Path:
    """Last-100 mean reward and mean episode length against environment steps."""
    if len(log.get("step", ())) == 0:
        raise EmptyInputError("empty training log")
    fig, (a, b) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    a.plot(log["step"], log["mean100_return"], gid="mean100_return")
    a.set_ylabel("mean reward (last 100)")
    b.plot(log["step"], log["mean100_len"], gid="mean100_len", color="tab:orange")
    b.set_ylabel("mean episode length (last 100)")
    b.set_xlabel("environment steps")
    for ax in (a, b):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def trajectory(traj: Trajectory, config: EnvConfig, path, title: str = "") -> Path:
    """Top-down view: arena, geofence, obstacles, goal disc, true path and estimates."""
    if len(traj) == 0:
        raise EmptyInputError("empty trajectory")
    c = config
    fig, ax = plt.subplots(figsize=(7, 7 * (c.y_max - c.y_min) / (c.x_max - c.x_min) + 0.5))
    ax.add_patch(Rectangle((c.x_min, c.y_min), c.x_max - c.x_min, c.y_max - c.y_min,
                           fill=False, lw=1.5, color="k", gid="arena"))
    ax.add_patch(Rectangle((c.x_min + c.r_minor, c.y_min + c.r_minor), c.x_max - c.x_min - 2 * c.r_minor,
                           c.y_max - c.y_min - 2 * c.r_minor, fill=False, ls="--", color="gray", gid="geofence"))
    for i, (ox, oy, r) in enumerate(traj.obstacles):
        ax.add_patch(Circle((ox, oy), r, color="dimgray", gid=f"obstacle-{i}"))
    ax.add_patch(Circle(traj.goal, c.eps_success, color="gold", alpha=0.8, gid="goal"))
    true = np.asarray(traj.true_pos)
    est = np.asarray(traj.est_pos)
    ax.plot(est[:, 0], est[:, 1], ".", color="green", ms=3, label="estimate", gid="estimate")
    ax.plot(true[:, 0], true[:, 1], "-", color="red", lw=1.5, label="true", gid="true-path")
    ax.set_xlim(c.x_min - 0.1, c.x_max + 0.1)
    ax.set_ylim(c.y_min - 0.1, c.y_max + 0.1)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="upper left")
    ax.set_title(title or f"outcome: {traj.outcome}")
    fig.tight_layout()
    return _save(fig, path)


def render(kind: str, results: list[CellResult], path, title: str = "") -> Path:
    if kind == "unbiased":
        return success_curve(results, "sigma", path, title)
    if kind == "bias_only":
        return success_curve(results, "mu", path, title)
    if kind in ("biased", "biased_grid"):
        return success_heatmap(results, path, title)
    raise ValueError(f"unknown plot kind {kind!r}")

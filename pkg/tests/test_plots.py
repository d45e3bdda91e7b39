import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from uavnav import plots
from uavnav.env import EnvConfig
from uavnav.evaluate import CellResult, Trajectory

SVG = "{http://www.w3.org/2000/svg}"


def cell(mu, sigma, rate, denoiser="none"):
    n = 100
    s = int(round(rate * n))
    return CellResult(mu=mu, sigma=sigma, denoiser=denoiser, episodes=n, successes=s, collisions=n - s, timeouts=0,
                      success_rate=s / n, mean_return=0.0, mean_length=10.0)


def series_points(path, gid):
    """(x, y) pixel coordinates of the path inside <g id=gid>."""
    root = ET.parse(path).getroot()
    for g in root.iter(f"{SVG}g"):
        if g.get("id") == gid:
            d = next(g.iter(f"{SVG}path")).get("d")
            nums = [float(v) for v in re.findall(r"-?\d+(?:\.\d+)?(?:e-?\d+)?", d)]
            return np.array(nums).reshape(-1, 2)
    raise AssertionError(f"no group {gid!r}")


def test_monotone_series_renders_monotone(tmp_path):
    rates = np.linspace(0.9, 0.1, 31)
    results = [cell(0.0, round(0.1 * i, 1), r) for i, r in enumerate(rates)]
    results += [cell(0.0, round(0.1 * i, 1), 0.5, "kalman") for i in range(31)]
    out = plots.success_curve(results[::-1], "sigma", tmp_path / "u.svg")
    pts = series_points(out, "series-none")
    assert len(pts) == 31
    assert np.all(np.diff(pts[:, 0]) > 0)   # x increases left to right
    assert np.all(np.diff(pts[:, 1]) > 0)   # decreasing rate: SVG y grows downward
    flat = series_points(out, "series-kalman")
    assert np.allclose(flat[:, 1], flat[0, 1])


def test_single_cell_line_chart(tmp_path):
    out = plots.render("bias_only", [cell(0.1, 0.0, 0.4)], tmp_path / "one.svg")
    assert series_points(out, "series-none").shape == (1, 2)


def test_heatmap_grid_and_colorbar(tmp_path):
    mus = [round(0.01 * i, 2) for i in range(31)]
    sigmas = [round(0.1 * j, 1) for j in range(31)]
    results = [cell(m, s, max(0.0, 1 - m * 2 - s / 4)) for m in mus for s in sigmas]
    out = plots.render("biased", results, tmp_path / "h.svg")
    text = out.read_text()
    assert 'id="heatmap-none"' in text
    assert "success rate" in text  # colorbar label
    root = ET.parse(out).getroot()
    axes = [g for g in root.iter(f"{SVG}g") if (g.get("id") or "").startswith("axes_")]
    assert len(axes) == 2  # heatmap + colorbar


def test_output_deterministic(tmp_path):
    results = [cell(0.0, 0.1 * i, 0.5) for i in range(5)]
    a = plots.success_curve(results, "sigma", tmp_path / "a.svg").read_bytes()
    b = plots.success_curve(results, "sigma", tmp_path / "b.svg").read_bytes()
    assert a == b


def test_empty_inputs_rejected(tmp_path):
    with pytest.raises(plots.EmptyInputError):
        plots.render("unbiased", [], tmp_path / "x.svg")
    with pytest.raises(plots.EmptyInputError):
        plots.render("biased", [], tmp_path / "x.svg")
    with pytest.raises(plots.EmptyInputError):
        plots.trajectory(Trajectory(), EnvConfig(), tmp_path / "x.svg")
    (tmp_path / "log.csv").write_text("step,episode\n")
    with pytest.raises(plots.EmptyInputError):
        plots.read_trainlog(tmp_path / "log.csv")


def test_training_curves(tmp_path):
    steps = np.arange(1, 51) * 100.0
    log = {"step": steps, "mean100_return": -1000 + steps / 10, "mean100_len": 400 - steps / 20}
    out = plots.training_curves(log, tmp_path / "t.svg")
    ret = series_points(out, "mean100_return")
    assert np.all(np.diff(ret[:, 1]) < 0)  # rising reward: y pixel decreases
    ln = series_points(out, "mean100_len")
    assert np.all(np.diff(ln[:, 1]) > 0)


def test_trajectory_render(tmp_path):
    cfg = EnvConfig()
    traj = Trajectory(true_pos=[(0.2, 0.0), (1.0, 0.1), (4.8, 0.0)], noisy_pos=[(0.3, 0.1)] * 3,
                      est_pos=[(0.25, 0.05), (1.1, 0.1), (4.7, 0.0)], obstacles=((2.0, 0.5, 0.15),),
                      goal=(4.8, 0.0), outcome="success")
    text = plots.trajectory(traj, cfg, tmp_path / "r.svg").read_text()
    for gid in ("arena", "geofence", "obstacle-0", "goal", "true-path", "estimate"):
        assert f'id="{gid}"' in text

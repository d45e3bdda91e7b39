import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from uavnav import env
from uavnav.env import COLLISION, RUNNING, SUCCESS, TIMEOUT, EnvConfig, SimState


def wide_config(**kw):
    base = dict(x_min=-10.0, x_max=10.0, y_min=-10.0, y_max=10.0, obstacle_count_min=0, obstacle_count_max=0)
    base.update(kw)
    return EnvConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        EnvConfig(r_major=0.3, r_minor=0.2)
    with pytest.raises(ValueError):
        EnvConfig(x_min=1.0, x_max=0.0)
    with pytest.raises(ValueError):
        EnvConfig(obstacle_count_min=3, obstacle_count_max=1)
    assert EnvConfig().obstacle_y_sigma == pytest.approx(4.0 / 6.0)


def test_reset_geometry_without_obstacles():
    cfg = EnvConfig(obstacle_count_min=0, obstacle_count_max=0)
    for seed in range(20):
        state, obs = env.reset(cfg, np.random.default_rng(seed))
        assert state.obstacles == ()
        assert state.pos[0] == cfg.x_min + cfg.r_minor
        assert cfg.y_min + cfg.r_minor <= state.pos[1] <= cfg.y_max - cfg.r_minor
        assert state.goal == (cfg.x_max - cfg.r_minor, 0.0)
        assert obs.dx_goal == pytest.approx((cfg.x_max - cfg.x_min) - 2 * cfg.r_minor)
        assert obs.dy_goal == pytest.approx(state.goal[1] - state.pos[1])


def test_reset_is_seeded():
    cfg = EnvConfig()
    a, _ = env.reset(cfg, np.random.default_rng(7))
    b, _ = env.reset(cfg, np.random.default_rng(7))
    assert a == b


def test_reset_obstacles_respect_keep_out_and_bounds():
    cfg = EnvConfig(obstacle_count_min=3, obstacle_count_max=3)
    keep_out = cfg.r_minor + cfg.obstacle_radius
    for seed in range(200):
        state, _ = env.reset(cfg, np.random.default_rng(seed))
        for ox, oy, r in state.obstacles:
            assert math.dist((ox, oy), state.pos) > keep_out
            assert math.dist((ox, oy), state.goal) > keep_out
            assert cfg.x_min < ox - r and ox + r < cfg.x_max
            assert cfg.y_min <= oy - r and oy + r <= cfg.y_max


def test_reset_obstacle_count_uniform():
    cfg = EnvConfig(obstacle_count_min=1, obstacle_count_max=3)
    rng = np.random.default_rng(0)
    counts = np.bincount([len(env.reset(cfg, rng)[0].obstacles) for _ in range(10_000)], minlength=4)[1:]
    # chi-square goodness of fit against uniform {1, 2, 3}
    assert stats.chisquare(counts).pvalue > 0.01
    n, p = 10_000, 1 / 3
    assert np.all(np.abs(counts - n * p) < 3 * math.sqrt(n * p * (1 - p)))


def test_reset_overdense_config_raises():
    cfg = EnvConfig(x_min=0.0, x_max=1.0, y_min=-0.5, y_max=0.5, obstacle_radius=0.3,
                    obstacle_count_min=1, obstacle_count_max=1)
    with pytest.raises(env.ObstaclePlacementError):
        env.reset(cfg, np.random.default_rng(0), max_tries=50)


def test_step_unit_direction_example():
    cfg = wide_config(v_max=2.0, dt=1.0)
    s = SimState(pos=(0.0, 0.0), goal=(9.0, 0.0), obstacles=())
    s2, out = env.step(s, (0.6, 0.8, 1.0), cfg)
    assert s2.pos == pytest.approx((1.2, 1.6), abs=1e-12)
    assert s2.step == 1 and not out.terminal


def test_step_zero_speed_and_zero_direction():
    cfg = wide_config()
    s = SimState(pos=(1.0, 1.0), goal=(9.0, 0.0), obstacles=())
    s2, _ = env.step(s, (0.3, -0.2, -1.0), cfg)
    assert s2.pos == (1.0, 1.0) and s2.step == 1
    s3, _ = env.step(s, (0.0, 0.0, 1.0), cfg)
    assert s3.pos == (1.0, 1.0)


def test_step_success():
    cfg = wide_config(v_max=1.0, dt=1.0)
    s = SimState(pos=(0.0, 0.0), goal=(1.05, 0.0), obstacles=())
    s2, out = env.step(s, (1.0, 0.0, 1.0), cfg)
    assert s2.done_reason == SUCCESS and out.terminal
    assert out.reward == 1000.0


def test_step_collision_and_timeout():
    cfg = wide_config(v_max=1.0, dt=1.0, max_steps=3)
    s = SimState(pos=(0.0, 0.0), goal=(9.0, 0.0), obstacles=((1.5, 0.0, 0.5),))
    s2, out = env.step(s, (1.0, 0.0, 1.0), cfg)
    assert s2.done_reason == COLLISION and out.reward == -1000.0
    s = SimState(pos=(0.0, 5.0), goal=(9.0, 0.0), obstacles=(), step=2)
    s2, out = env.step(s, (0.0, 0.0, 0.0), cfg)
    assert s2.done_reason == TIMEOUT and out.reward == -1000.0


def test_step_after_done_raises():
    s = SimState(pos=(0.0, 0.0), goal=(1.0, 0.0), obstacles=(), done_reason=SUCCESS)
    with pytest.raises(ValueError):
        env.step(s, (1.0, 0.0, 1.0), EnvConfig())


def test_wall_contact_is_breach_not_collision():
    cfg = EnvConfig(obstacle_count_min=0, obstacle_count_max=0)
    s = SimState(pos=(2.0, cfg.y_max - 0.01), goal=cfg.goal, obstacles=())
    for _ in range(3):
        s, out = env.step(s, (0.0, 1.0, 1.0), cfg)
    assert s.pos[1] == cfg.y_max
    assert s.done_reason == RUNNING
    assert out.breach_major and out.breach_minor


def test_observe_goal_offset():
    s = SimState(pos=(1.0, 1.0), goal=(4.0, 0.0), obstacles=())
    o = env.observe(s, wide_config())
    assert (o.dx_goal, o.dy_goal) == (3.0, -1.0)


def test_observe_nearest_obstacle_surface():
    center, r, pos = np.array([2.0, 0.0]), 0.5, np.array([0.0, 0.0])
    s = SimState(pos=tuple(pos), goal=(5.0, 0.0), obstacles=((2.0, 0.0, 0.5),))
    o = env.observe(s, wide_config())
    # oracle: closest surface point = center - radius * unit(center - pos)
    u = (center - pos) / np.linalg.norm(center - pos)
    expected = center - r * u - pos
    assert (o.dx_obs, o.dy_obs) == pytest.approx(tuple(expected), abs=1e-12)
    assert (o.dx_obs, o.dy_obs) == pytest.approx((1.5, 0.0))


def test_observe_tie_break_lowest_index():
    obstacles = ((0.0, 2.0, 0.5), (0.0, -2.0, 0.5))
    s = SimState(pos=(0.0, 0.0), goal=(5.0, 0.0), obstacles=obstacles)
    hz = env.nearest_hazard(s.pos, obstacles, wide_config())
    assert hz.index == 0 and (hz.dx, hz.dy) == pytest.approx((0.0, 1.5))


def test_observe_without_obstacles_points_to_nearest_wall():
    cfg = EnvConfig(obstacle_count_min=0, obstacle_count_max=0)
    s = SimState(pos=(1.0, 1.7), goal=cfg.goal, obstacles=())
    o = env.observe(s, cfg)
    assert (o.dx_obs, o.dy_obs) == pytest.approx((0.0, 0.3))


@pytest.mark.parametrize("d,minor,major,expected", [
    (0.5, False, False, -2.0),
    (0.5, True, False, -3.0),
    (0.5, True, True, -8.0),
])
def test_reward_dense_branch(d, minor, major, expected):
    s = SimState(pos=(0.0, 0.0), goal=(d, 0.0), obstacles=())
    assert env.reward(s, major, minor, EnvConfig()) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("reason,expected", [(SUCCESS, 1000.0), (COLLISION, -1000.0), (TIMEOUT, -1000.0)])
def test_reward_terminal_branches(reason, expected):
    s = SimState(pos=(0.0, 0.0), goal=(3.0, 0.0), obstacles=(), done_reason=reason)
    assert env.reward(s, True, True, EnvConfig()) == expected


actions = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), acts=st.lists(actions, min_size=1, max_size=60))
def test_step_properties(seed, acts):
    cfg = EnvConfig(max_steps=40)
    s, _ = env.reset(cfg, np.random.default_rng(seed))
    trace_a, trace_b = [], []
    sa = sb = s
    total = 0.0
    success = False
    for a in acts:
        if sa.done_reason != RUNNING:
            break
        sa, oa = env.step(sa, a, cfg)
        sb, ob = env.step(sb, a, cfg)
        trace_a.append((sa, oa.reward))
        trace_b.append((sb, ob.reward))
        total += oa.reward
        success |= sa.done_reason == SUCCESS
        assert cfg.x_min <= sa.pos[0] <= cfg.x_max and cfg.y_min <= sa.pos[1] <= cfg.y_max
        assert oa.terminal == (sa.done_reason != RUNNING)
        assert not oa.breach_major or oa.breach_minor
    assert trace_a == trace_b
    if not success:
        assert total < 0

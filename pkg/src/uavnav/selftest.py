"""Fast built-in oracle checks, run by ``uavnav selftest``.

Each check compares a library routine against an independent computation
(closed form, brute force or finite differences). The full test suite lives
in ``tests/``; this module covers the core numerics in a few seconds without
pytest.
"""

from __future__ import annotations

import math

import numpy as np

from . import env
from .env import EnvConfig, SimState
from .filters import KalmanState, kalman_step, lpf_design
from .nn import Mlp, flatten, unflatten_into
from .noise import NoiseSpec, perturb_position
from .ppo import compute_gae


def check_reward_constants():
    cfg = EnvConfig()
    s = SimState(pos=(1.0, 0.0), goal=(4.0, 0.0), obstacles=())
    assert env.reward(s, False, False, cfg) == -4.0 * 3.0
    assert env.reward(s, True, True, cfg) == -12.0 - 5.0 - 1.0
    assert env.reward(SimState((4.0, 0.0), (4.0, 0.0), (), 1, env.SUCCESS), False, False, cfg) == 1000.0
    assert env.reward(SimState((1.0, 0.0), (4.0, 0.0), (), 1, env.COLLISION), True, True, cfg) == -1000.0
    assert cfg.eps_success == 0.1


def check_lpf():
    for cutoff, fs in ((2.0, 20.0), (5.0, 50.0)):
        c = lpf_design(cutoff, fs)
        assert abs(c.dc_gain - 1.0) < 1e-9
        w = 2 * fs * math.tan(cutoff / (2 * fs))
        want = sorted(((2 * fs + s) / (2 * fs - s) for s in (w * (-3 + 1j * math.sqrt(3)) / 2,
                                                          w * (-3 - 1j * math.sqrt(3)) / 2)), key=lambda z: z.imag)
        got = sorted(c.poles(), key=lambda z: z.imag)
        assert all(abs(g - e) < 1e-9 for g, e in zip(got, want))


def check_kalman_spd():
    rng = np.random.default_rng(0)
    st = KalmanState(q=0.05, r=0.25)
    for _ in range(2000):
        kalman_step(st, rng.normal(size=2), rng.uniform(-1, 1, 2), 0.05)
    assert np.allclose(st.P, st.P.T, atol=1e-9) and np.all(np.linalg.eigvalsh(st.P) > 0)


def check_gradients():
    rng = np.random.default_rng(1)
    net = Mlp((4, 16, 16, 3), "tanh", np.float64, rng, output_gain=1.0)
    x, y = rng.normal(size=(5, 4)), rng.normal(size=(5, 3))
    out, cache = net.forward(x)
    g = flatten(net.backward(cache, out - y))
    theta = flatten(net.params)
    for i in rng.choice(theta.size, 30, replace=False):
        vals = []
        for h in (1e-5, -1e-5):
            t = theta.copy()
            t[i] += h
            unflatten_into(t, net.params)
            vals.append(0.5 * np.sum((net(x) - y) ** 2))
        unflatten_into(theta, net.params)
        fd = (vals[0] - vals[1]) / 2e-5
        assert abs(fd - g[i]) <= 1e-4 * max(abs(fd), abs(g[i]), 1e-8)


def check_gae():
    rng = np.random.default_rng(2)
    r, v = rng.normal(size=10), rng.normal(size=10)
    d = (rng.random(10) < 0.3).astype(float)
    adv, _ = compute_gae(r, v, d, 0.5, 0.99, 0.95)
    nv = np.append(v[1:], 0.5)
    delta = r + 0.99 * nv * (1 - d) - v
    for t in range(10):
        acc, w = 0.0, 1.0
        for k in range(t, 10):
            acc += w * delta[k]
            if d[k]:
                break
            w *= 0.99 * 0.95
        assert abs(acc - adv[t]) < 1e-10


def check_bias_offset():
    x, y = perturb_position((1.0, 2.0), NoiseSpec(0.15, 0.0), np.random.default_rng(0))
    assert (x, y) == (1.0 + 0.15, 2.0 + 0.15)


CHECKS = [check_reward_constants, check_lpf, check_kalman_spd, check_gradients, check_gae, check_bias_offset]


def run(out=print) -> bool:
    ok = True
    for check in CHECKS:
        name = check.__name__.removeprefix("check_")
        try:
            check()
            out(f"PASS {name}")
        except AssertionError as e:
            ok = False
            out(f"FAIL {name} {e}")
    return ok

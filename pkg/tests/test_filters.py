import math

import numpy as np
import pytest
from scipy import signal

from uavnav.filters import (DenoiserKind, FilterConfig, KalmanState, LpfState, denoise, kalman_step, lpf_design,
                            lpf_step, make_state)

FS = 20.0


def run_lpf(coeffs, xs, warm_start=False):
    st = LpfState(coeffs, warm_start=warm_start)
    return np.array([lpf_step(st, (x, 0.0))[0][0] for x in xs])


@pytest.mark.parametrize("cutoff,fs", [(2.0, 20.0), (0.5, 10.0), (10.0, 100.0), (30.0, 20.0)])
def test_dc_gain_unity(cutoff, fs):
    assert lpf_design(cutoff, fs).dc_gain == pytest.approx(1.0, abs=1e-9)


def test_rejects_cutoff_above_nyquist():
    with pytest.raises(ValueError):
        lpf_design(math.pi * FS, FS)
    with pytest.raises(ValueError):
        lpf_design(0.0, FS)


@pytest.mark.parametrize("cutoff,fs", [(2.0, 20.0), (5.0, 50.0), (1.0, 5.0)])
def test_poles_match_bilinear_image_of_prototype(cutoff, fs):
    # prototype roots of s^2 + 3s + 3, scaled to the prewarped cutoff, mapped by z = (2fs + s) / (2fs - s)
    warped = 2 * fs * math.tan(cutoff / (2 * fs))
    expected = []
    for sign in (1, -1):
        s = warped * (-3 + sign * 1j * math.sqrt(3)) / 2
        expected.append((2 * fs + s) / (2 * fs - s))
    got = lpf_design(cutoff, fs).poles()
    got = sorted(got, key=lambda z: z.imag)
    expected = sorted(expected, key=lambda z: z.imag)
    for g, e in zip(got, expected):
        assert abs(g - e) < 1e-9
        assert abs(g) < 1.0


def test_prewarped_cutoff_response_matches_prototype():
    c = lpf_design(2.0, FS)
    _, h = signal.freqz([c.b0, c.b1, c.b2], [1.0, c.a1, c.a2], worN=[2.0 / FS])
    proto = 3 / ((1j) ** 2 + 3j + 3)  # H(j * cutoff) of the scaled prototype
    assert abs(h[0]) == pytest.approx(abs(proto), abs=1e-9)


def test_rolloff():
    c = lpf_design(2.0, FS)
    _, h = signal.freqz([c.b0, c.b1, c.b2], [1.0, c.a1, c.a2], worN=[2.0 / FS, 20.0 / FS])
    assert abs(h[1]) < abs(h[0])


def test_matches_scipy_lfilter():
    c = lpf_design(2.0, FS)
    x = np.random.default_rng(0).standard_normal(500)
    ref = signal.lfilter([c.b0, c.b1, c.b2], [1.0, c.a1, c.a2], x)
    assert np.allclose(run_lpf(c, x), ref, atol=1e-12)


def test_constant_input_converges():
    c = lpf_design(2.0, FS)
    # time constant ~ 1 / cutoff = 0.5 s; 10 time constants = 100 samples, use a margin
    y = run_lpf(c, np.full(400, 3.7))
    assert abs(y[-1] - 3.7) < 1e-6


def test_zero_in_zero_out():
    c = lpf_design(2.0, FS)
    assert np.all(run_lpf(c, np.zeros(50)) == 0.0)


def test_warm_start_first_output_equals_input():
    c = lpf_design(2.0, FS)
    y = run_lpf(c, np.full(30, -1.25), warm_start=True)
    assert np.allclose(y, -1.25, atol=1e-12)


def test_linearity():
    c = lpf_design(2.0, FS)
    rng = np.random.default_rng(1)
    u, w = rng.standard_normal(300), rng.standard_normal(300)
    a, b = 1.7, -0.4
    assert np.allclose(run_lpf(c, a * u + b * w), a * run_lpf(c, u) + b * run_lpf(c, w), atol=1e-9)


def test_impulse_response_decays():
    c = lpf_design(2.0, FS)
    x = np.zeros(2000)
    x[0] = 1.0
    y = run_lpf(c, x)
    assert np.max(np.abs(y[-100:])) < 1e-12


def test_variance_reduction_white_noise():
    c = lpf_design(2.0, FS)
    x = np.random.default_rng(2).standard_normal(100_000)
    assert run_lpf(c, x).std() < x.std()


def test_kalman_noiseless_stationary_converges():
    st = KalmanState(q=0.05, r=1e-6)
    est = None
    for _ in range(50):
        est, st = kalman_step(st, (1.3, -0.7), (0.0, 0.0), 0.05)
    assert est == pytest.approx((1.3, -0.7), abs=1e-3)


def test_kalman_update_does_not_increase_trace():
    from uavnav.filters import kalman_predict, kalman_update
    rng = np.random.default_rng(3)
    st = KalmanState(q=0.05, r=0.25)
    kalman_step(st, (0.0, 0.0), (0.0, 0.0), 0.05)
    for _ in range(200):
        kalman_predict(st, rng.uniform(-1, 1, 2), 0.05)
        before = np.trace(st.P)
        kalman_update(st, rng.normal(size=2))
        assert np.trace(st.P) <= before + 1e-12


def test_kalman_covariance_stays_spd():
    rng = np.random.default_rng(4)
    st = KalmanState(q=0.05, r=0.01)
    for _ in range(10_000):
        kalman_step(st, rng.normal(scale=2.0, size=2), rng.uniform(-1, 1, 2), 0.05)
        assert np.allclose(st.P, st.P.T, atol=1e-9)
    assert np.all(np.linalg.eigvalsh(st.P) > 0)


def test_kalman_rejects_non_finite():
    with pytest.raises(ValueError):
        kalman_step(KalmanState(), (math.nan, 0.0), (0.0, 0.0), 0.05)


def constant_velocity_track(n, v=(0.5, 0.0), dt=0.05):
    t = np.arange(n)[:, None] * dt
    return t * np.asarray(v)


def test_kalman_beats_raw_on_straight_flight():
    rng = np.random.default_rng(5)
    true = constant_velocity_track(1000, v=(0.5, 0.0))
    meas = true + rng.normal(0.0, 0.5, true.shape)
    st = KalmanState(q=0.05, r=0.25)
    est = np.array([kalman_step(st, m, (0.5, 0.0), 0.05)[0] for m in meas])
    raw_rmse = np.sqrt(np.mean(np.sum((meas - true) ** 2, axis=1)))
    kf_rmse = np.sqrt(np.mean(np.sum((est - true) ** 2, axis=1)))
    assert kf_rmse < raw_rmse


def test_denoisers_keep_bias():
    dt = 0.05
    lpf = make_state(FilterConfig("lpf"), dt)
    kf = make_state(FilterConfig("kalman"), dt, noise_sigma=0.0)
    c = (0.15, 0.15)
    for _ in range(300):
        out_l, _ = denoise("lpf", lpf, c, (0.0, 0.0), dt)
        out_k, _ = denoise("kalman", kf, c, (0.0, 0.0), dt)
    assert out_l == pytest.approx(c, abs=1e-9)
    assert out_k == pytest.approx(c, abs=1e-6)


def test_denoise_dispatch():
    dt = 0.05
    m = (0.3, -0.2)
    assert denoise(DenoiserKind.NONE, None, m, (0.0, 0.0), dt) == (m, None)
    a, b = make_state(FilterConfig("lpf"), dt), make_state(FilterConfig("lpf"), dt)
    for x in [(0.1, 0.2), (0.5, -0.1), (0.0, 0.0)]:
        assert denoise("lpf", a, x, (0.0, 0.0), dt)[0] == lpf_step(b, x)[0]
    a, b = make_state(FilterConfig("kalman"), dt, 0.5), make_state(FilterConfig("kalman"), dt, 0.5)
    for x in [(0.1, 0.2), (0.5, -0.1), (0.0, 0.0)]:
        assert denoise("kalman", a, x, (0.2, 0.1), dt)[0] == kalman_step(b, x, (0.2, 0.1), dt)[0]


def test_denoise_kind_state_mismatch():
    with pytest.raises(TypeError):
        denoise("kalman", make_state(FilterConfig("lpf"), 0.05), (0.0, 0.0), (0.0, 0.0), 0.05)
    with pytest.raises(TypeError):
        denoise("lpf", None, (0.0, 0.0), (0.0, 0.0), 0.05)

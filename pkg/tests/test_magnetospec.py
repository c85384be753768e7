import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.ndimage import convolve

from vsmap.magnetospec import (SOBEL_Y, CapacitanceRatioMap, GateKernel, TransitionScan,
                               cross_capacitance_ratio, default_gate_layout, fit_01_transition, fit_EST,
                               load_scan, lorentzian, measured_ratio, save_scan, sobel_filter,
                               subtract_background, subtract_correlated_noise, track_transition, triangulate,
                               v01_model, v12_model, y_displacement_calibration)
from vsmap.physics import CONST

MU_G = 2 * CONST.mu_B  # ueV/T


# ------------------------------------------------------------------ sobel

def test_sobel_constant_image_is_zero():
    assert np.all(sobel_filter(np.full((5, 7), 3.2)) == 0)


def test_sobel_step_edge_hand_values():
    img = np.zeros((10, 6))
    img[5:] = 1.0
    out = sobel_filter(img)
    np.testing.assert_array_equal(out[4], 4.0)
    np.testing.assert_array_equal(out[5], 4.0)
    assert np.all(out[[0, 1, 2, 3, 6, 7, 8, 9]] == 0)
    np.testing.assert_array_equal(sobel_filter(1 - img)[4], -4.0)


def test_sobel_ramp_hand_values():
    s = 0.25
    img = s * np.arange(8)[:, None] * np.ones((1, 5))
    np.testing.assert_array_equal(sobel_filter(img)[1:-1], 8 * s)


@given(arrays(float, (6, 5), elements=st.floats(-10, 10)))
def test_sobel_transpose_orientation(img):
    np.testing.assert_allclose(sobel_filter(img.T), convolve(img, SOBEL_Y.T, mode="nearest").T, atol=1e-12)
    np.testing.assert_allclose(sobel_filter(img), convolve(img, SOBEL_Y, mode="nearest"), atol=1e-12)


def test_sobel_rejects_small_image():
    with pytest.raises(ValueError):
        sobel_filter(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        sobel_filter(np.zeros(9))


# ------------------------------------------------------------- background

def test_background_constant_and_spike():
    assert np.all(subtract_background(np.full((40, 3), 2.0), 3) == 0)
    line = np.full((40, 1), 1.0)
    line[20] = 6.0
    out = subtract_background(line, 3)
    assert out[20, 0] == 5.0
    assert np.all(np.delete(out[:, 0], 20) == 0)


def test_background_rejects_bad_kernel():
    with pytest.raises(ValueError):
        subtract_background(np.zeros((10, 2)), 0)
    with pytest.raises(ValueError):
        subtract_background(np.zeros((10, 2)), 4)


def test_background_lorentzian_amplitude():
    V = np.arange(600.0)
    hwhm = 3.0
    bg = 2.0 + 0.3 * np.sin(V / 200)
    peak = lorentzian(V, 1.0, 300.0, hwhm, 0.0)
    # footprint where the line exceeds 5% of its maximum
    footprint = int(round(2 * hwhm * math.sqrt(19)))
    out = subtract_background((bg + peak)[:, None], footprint)[:, 0]
    assert out[300] == pytest.approx(1.0, rel=0.05)
    assert np.argmax(out) == 300
    # a FWHM-sized kernel keeps the centre but clips the amplitude
    out_fwhm = subtract_background((bg + peak)[:, None], int(2 * hwhm))[:, 0]
    assert np.argmax(out_fwhm) == 300


# --------------------------------------------------------------- tracking

def _lorentz_scan(centres, w=40e-6, A=1.0, noise=0.0, seed=0):
    V = np.linspace(-1e-3, 1e-3, 201)
    B = np.linspace(0, 1, len(centres))
    S = lorentzian(V[:, None], A, np.asarray(centres)[None, :], w, 0.1)
    S = S + np.random.default_rng(seed).normal(0, noise, S.shape)
    return TransitionScan(B, V, S)


def test_tracking_noiseless_exact():
    c = np.linspace(-3e-4, 3e-4, 7)
    t = track_transition(_lorentz_scan(c))
    assert t.valid.all()
    np.testing.assert_allclose(t.V, c, atol=1e-6)


def test_tracking_snr10():
    c = np.random.default_rng(5).uniform(-3e-4, 3e-4, 40)
    w = 40e-6
    t = track_transition(_lorentz_scan(c, w=w, noise=0.1, seed=1))
    assert t.valid.all()
    assert np.max(np.abs(t.V - c)) < 2 * w / 10  # linewidth is the FWHM


def test_tracking_flags_empty_line():
    scan = _lorentz_scan([0.0, 1e-4])
    S = scan.signal.copy()
    S[:, 1] = np.random.default_rng(0).normal(0, 0.01, S.shape[0])
    t = track_transition(scan.with_signal(S))
    assert t.valid.tolist() == [True, False]
    assert np.isnan(t.V[1])


def test_scan_io_and_validation(tmp_path):
    scan = _lorentz_scan([0.0, 1e-4, 2e-4])
    save_scan(scan, tmp_path / "s.csv")
    back = load_scan(tmp_path / "s.csv")
    np.testing.assert_allclose(back.signal, scan.signal)
    with pytest.raises(ValueError):
        TransitionScan([0, 1], [1, 0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        TransitionScan([0, 1], [0, 1], np.zeros((3, 2)))


# ------------------------------------------------------------ lineshapes

@pytest.mark.parametrize("alpha, T, V0", [(0.1, 0.1, 0.0), (0.05, 0.3, 0.01)])
def test_v01_zero_field_limit(alpha, T, V0):
    beta = 1 / (CONST.k_B * T)
    assert v01_model(0.0, alpha, T, V0) == pytest.approx(V0 - math.log(2) / (alpha * 1e6 * beta), abs=1e-14)


def test_v01_large_field_slope():
    alpha = 0.1
    B = np.array([5.0, 6.0])
    V = v01_model(B, alpha, 0.1, 0.0)
    assert (V[1] - V[0]) == pytest.approx(-MU_G / (2 * alpha * 1e6), rel=1e-9)


@given(st.floats(0.01, 1.0), st.floats(0.02, 1.0))
def test_v01_monotone(alpha, T):
    V = v01_model(np.linspace(0, 2, 400), alpha, T, 0.0)
    assert np.all(np.diff(V) <= 1e-15)


def test_v12_zero_field_value():
    alpha, T, V0, E = 0.1, 0.1, 0.002, 50.0
    beta = 1 / (CONST.k_B * T)
    expect = V0 + math.log(2 * math.exp(beta * E) / (math.exp(beta * E) + 3)) / (alpha * 1e6 * beta)
    assert v12_model(0.0, alpha, T, V0, E) == pytest.approx(expect, abs=1e-14)


def test_v12_slope_converges_at_large_field():
    B = np.linspace(1, 8, 701)
    s = np.gradient(v12_model(B, 0.1, 0.1, 0.0, 50.0), B)
    tail = np.abs(np.diff(s))
    assert tail[-1] < 1e-12
    assert np.all(np.diff(np.abs(s[-300:] - s[-1])) <= 1e-15)


def test_v12_kink_location():
    E, T = 50.0, 0.02
    B = np.linspace(0, 1, 4001)
    V = v12_model(B, 0.1, T, 0.0, E)
    curv = np.gradient(np.gradient(V, B), B)
    B_star = B[np.argmax(np.abs(curv[20:])) + 20]
    assert abs(MU_G * B_star - E) < 3 * CONST.k_B * T


def test_fit01_round_trip():
    B = np.linspace(0, 1, 301)
    V = v01_model(B, 0.1, 0.1, 0.0) + np.random.default_rng(0).normal(0, 2e-6, B.size)
    f = fit_01_transition(B, V)
    assert f.model.alpha == pytest.approx(0.1, rel=0.01)
    assert f.model.T == pytest.approx(0.1, rel=0.05)
    assert not f.report.flags["under_identified"]
    assert np.nanstd(f.residuals) == pytest.approx(2e-6, rel=0.2)


def test_fit01_flags_narrow_range():
    B = np.linspace(0.6, 1.0, 50)
    f = fit_01_transition(B, v01_model(B, 0.1, 0.1, 0.0))
    assert f.report.flags["under_identified"]
    with pytest.raises(ValueError):
        fit_01_transition(B[:3], v01_model(B[:3], 0.1, 0.1, 0.0))


def test_correlated_noise_subtraction():
    B = np.linspace(0, 1, 50)
    V12 = v12_model(B, 0.1, 0.1, 0.0, 50.0)
    np.testing.assert_array_equal(subtract_correlated_noise(np.zeros(50), B, V12, B), V12)
    drift = 1e-4 * np.sin(9 * B)
    np.testing.assert_allclose(subtract_correlated_noise(drift, B, V12 + drift, B), V12, atol=1e-18)
    with pytest.raises(ValueError):
        subtract_correlated_noise(np.zeros(50), B, V12, B + 0.01)


def test_independent_noise_statistics_unchanged():
    rng = np.random.default_rng(3)
    B = np.linspace(0, 1, 301)
    f = fit_01_transition(B, v01_model(B, 0.1, 0.1, 0.0))
    noise = rng.normal(0, 50e-6, B.size)
    V12 = v12_model(B, 0.1, 0.1, 0.0, 50.0) + noise
    cleaned = subtract_correlated_noise(f.residuals, B, V12, B)
    assert np.std(cleaned - (V12 - noise)) == pytest.approx(np.std(noise), rel=0.01)


@pytest.mark.parametrize("seed", range(5))
def test_fit_EST_round_trip(seed):
    B = np.linspace(0, 1, 301)
    V = v12_model(B, 0.1, 0.1, 0.003, 50.0) + np.random.default_rng(seed).normal(0, 50e-6, B.size)
    rep = fit_EST(B, V, 0.1, 0.1)
    assert abs(rep.estimates[0] - 50.0) < 2.0
    assert rep.estimates[1] == pytest.approx(0.003, abs=2e-5)
    assert not rep.flags["kink_out_of_range"]


def test_fit_EST_flags_kink_out_of_range():
    B = np.linspace(0, 0.2, 80)
    rep = fit_EST(B, v12_model(B, 0.1, 0.1, 0.0, 50.0), 0.1, 0.1)
    assert rep.flags["kink_out_of_range"]


# ---------------------------------------------------------- triangulation

def test_identical_gates_ratio_one():
    k = [GateKernel("A", 0, 0, 30), GateKernel("B", 0, 0, 30)]
    m = cross_capacitance_ratio(k, "A", "B", np.linspace(-50, 50, 11), np.linspace(-50, 50, 11))
    np.testing.assert_allclose(m.ratio, 1.0, rtol=1e-12)


def test_displaced_kernels_closed_form():
    w = 25.0
    k = [GateKernel("A", -20, 5, w), GateKernel("B", 30, -10, w), GateKernel("C", 0, 40, w)]
    x = np.linspace(-40, 40, 17)
    y = np.linspace(-30, 30, 13)
    m = cross_capacitance_ratio(k, "A", "B", x, y, V_op={"A": 0.3, "B": -0.2, "C": 0.1})
    X, Y = np.meshgrid(x, y, indexing="ij")
    oracle = np.exp(-(((X + 20) ** 2 + (Y - 5) ** 2) - ((X - 30) ** 2 + (Y + 10) ** 2)) / (2 * w ** 2))
    np.testing.assert_allclose(m.ratio, oracle, rtol=1e-9)


def test_ratio_map_rejects_negative_and_masks_zero_denominator():
    with pytest.raises(ValueError):
        CapacitanceRatioMap(np.zeros(1), np.zeros(1), np.array([[-1.0]]), 1.0, 0.1)
    k = [GateKernel("A", 0, 0, 1.0), GateKernel("B", 0, 0, 1.0, amplitude=0.0)]
    m = cross_capacitance_ratio(k, "A", "B", [0.0, 1.0], [0.0])
    assert np.all(np.isnan(m.ratio))


def _maps(x0, y0, sig=(0.02, 0.02)):
    gates = default_gate_layout()
    x = np.linspace(-40, 40, 81)
    y = np.linspace(-40, 40, 81)
    a = cross_capacitance_ratio(gates, "SB", "ST", x, y)
    b = cross_capacitance_ratio(gates, "LB", "RB", x, y)
    i, j = np.argmin(np.abs(x - x0)), np.argmin(np.abs(y - y0))
    return a.with_measurement(a.ratio[i, j], sig[0]), b.with_measurement(b.ratio[i, j], sig[1])


@pytest.mark.parametrize("x0, y0", [(0.0, 0.0), (12.0, -7.0), (-20.0, 15.0)])
def test_triangulation_recovers_planted_point(x0, y0):
    a, b = _maps(x0, y0)
    t = triangulate(a, b)
    assert t.consistent
    assert abs(t.x - x0) <= 1.0 and abs(t.y - y0) <= 1.0


def test_widening_sigma_grows_uncertainty():
    prev_cells, prev_sx, prev_sy = 0, 0.0, 0.0
    for s in [0.01, 0.02, 0.05, 0.1, 0.2]:
        a, b = _maps(5.0, -5.0, (s, s))
        t = triangulate(a, b)
        assert t.cells >= prev_cells
        assert t.sigma_x >= prev_sx - 1e-12 and t.sigma_y >= prev_sy - 1e-12
        prev_cells, prev_sx, prev_sy = t.cells, t.sigma_x, t.sigma_y


def test_paper_ratios_intersect():
    a, b = _maps(0.0, 0.0)
    t = triangulate(a.with_measurement(1.25, 0.10), b.with_measurement(0.78, 0.08))
    assert t.consistent and t.cells > 0


def test_inconsistent_measurement_flagged():
    a, b = _maps(0.0, 0.0)
    t = triangulate(a.with_measurement(1e3, 1.0), b)
    assert not t.consistent and math.isnan(t.x)


def test_measured_ratio_propagation():
    r, s = measured_ratio(0.05, 0.04, 0.002, 0.002)
    assert r == pytest.approx(1.25)
    assert s == pytest.approx(1.25 * math.hypot(0.04, 0.05))


# ------------------------------------------------------------ calibration

def test_calibration_two_points():
    slope, sig = y_displacement_calibration([0.0, 0.1], [0.0, 6.0])
    assert slope == pytest.approx(60.0)


def test_calibration_exact_multi_point():
    dV = np.linspace(-0.3, 0.3, 9)
    slope, sig = y_displacement_calibration(dV, 42.0 * dV - 3.0)
    assert slope == pytest.approx(42.0, abs=1e-10) and sig < 1e-9


def test_calibration_with_scatter():
    rng = np.random.default_rng(0)
    dV = np.repeat(np.linspace(-0.2, 0.2, 5), 7)
    y = 60.0 * dV + rng.normal(0, 2.0, dV.size)
    slope, sig = y_displacement_calibration(dV, y)
    assert abs(slope - 60.0) < 20.0 and sig > 0


def test_calibration_degenerate():
    with pytest.raises(ValueError):
        y_displacement_calibration([0.1, 0.1], [0.0, 6.0])

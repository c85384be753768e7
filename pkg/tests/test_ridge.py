import numpy as np
import pytest
from hypothesis import given, strategies as st

from vsmap.analysis.ridge import (RidgeTrace, contiguous_segments, extract_ridge, load_ridge,
                                  resample_spline, ridge_rms_error, save_ridge)
from vsmap.forward import NoiseConfig, ProbabilityMap, simulate_shuttle_map
from vsmap.landscape import ValleyLandscape
from vsmap.physics import CONST, anticrossing_center

X = 1.4 * np.arange(151)
Y = np.array([-1.4, 0.0, 1.4])
D = np.linspace(0, 208.6, 100)
B = np.linspace(0.05, 0.56, 80)


def ridge_for(profile, seed=0):
    land = ValleyLandscape.from_functions(X, Y, lambda x, y: profile(x))
    pm = simulate_shuttle_map(land, D, B, noise=NoiseConfig(seed=seed))
    return extract_ridge(pm), anticrossing_center(profile(D))


def test_uniform_landscape_constant_ridge():
    r, truth = ridge_for(lambda x: np.full_like(x, 40.0))
    assert r.valid.mean() > 0.9
    assert ridge_rms_error(r, truth) < 8e-3


def test_single_dip_landscape():
    # the flat shoulders coincide with the stationary dwell line and are partly invalid
    r, truth = ridge_for(lambda x: 50 - 25 * np.exp(-((x - 100) / 30) ** 2))
    assert r.valid.mean() > 0.7
    dip = np.abs(D - 100) < 40
    assert r.valid[dip].all()
    assert ridge_rms_error(r, truth) < 8e-3


def test_out_of_window_entries_invalid():
    # E_VS climbs beyond the top of the field window (2 mu_B * 0.56 T = 64.8 ueV) for large d
    r, truth = ridge_for(lambda x: 30 + 50 * x / 210)
    # anticrossings just past the edge still leave a partial signature
    outside = truth > B[-1] + 0.01
    assert outside.sum() > 10
    assert not r.valid[outside].any()
    inside = truth < B[-1] - 0.02
    assert r.valid[inside].mean() > 0.9
    assert ridge_rms_error(r, truth) < 8e-3


def test_empty_and_narrow_maps_rejected():
    with pytest.raises(ValueError):
        extract_ridge(ProbabilityMap("d", np.zeros(0), "B", B, np.zeros((0, B.size))))
    with pytest.raises(ValueError):
        extract_ridge(ProbabilityMap("d", D[:5], "B", B[:3], np.full((5, 3), 0.5)))


@given(st.lists(st.floats(0, 1.2), min_size=1, max_size=30))
def test_trace_energy_identity(Bs):
    Bs = np.array(Bs)
    valid = np.arange(Bs.size) % 3 != 0
    tr = RidgeTrace(np.arange(Bs.size, dtype=float), np.where(valid, Bs, np.nan), valid)
    np.testing.assert_allclose(tr.E_VS[valid], 2 * CONST.mu_B * Bs[valid], rtol=1e-15)
    assert np.all(np.isnan(tr.E_VS[~valid]))


def test_save_load_round_trip(tmp_path):
    valid = np.array([True, False, True, True])
    tr = RidgeTrace(np.array([0.0, 1.4, 2.8, 4.2]), np.array([0.3, np.nan, 0.31, 0.32]), valid, -6.0)
    save_ridge(tr, tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "d_nm,B_T,E_VS_ueV,valid"
    back = load_ridge(tmp_path / "r.csv", -6.0)
    np.testing.assert_array_equal(back.valid, valid)
    np.testing.assert_allclose(back.B_VS[valid], tr.B_VS[valid])


def test_contiguous_segments():
    v = np.array([0, 1, 1, 0, 0, 1, 1, 1, 0, 1], dtype=bool)
    assert [(s.start, s.stop) for s in contiguous_segments(v)] == [(1, 3), (5, 8), (9, 10)]


def trace_from_E(d, E, valid=None):
    valid = np.ones(d.size, bool) if valid is None else valid
    return RidgeTrace(d, np.where(valid, E / (2 * CONST.mu_B), np.nan), valid)


@pytest.mark.parametrize("method", ["cubic", "pchip"])
def test_linear_input_resampled_exactly(method):
    d = np.linspace(0, 70, 11)
    dense = resample_spline(trace_from_E(d, 10 + 0.3 * d), method=method)
    np.testing.assert_allclose(dense.E_VS, 10 + 0.3 * dense.d, atol=1e-9)
    assert np.allclose(np.diff(dense.d), 1.4)


def test_cubic_reproduced_at_nodes():
    d = np.linspace(0, 42, 16)
    E = 20 + 0.5 * d - 0.01 * d ** 2 + 1e-4 * d ** 3
    dense = resample_spline(trace_from_E(d, E), pitch=2.8)
    np.testing.assert_allclose(dense.E_VS, 20 + 0.5 * dense.d - 0.01 * dense.d ** 2 + 1e-4 * dense.d ** 3,
                               atol=1e-9)


def test_sinusoid_resample_error():
    d = np.arange(0, 210.1, 7.0)
    f = lambda x: 35 + 10 * np.sin(2 * np.pi * x / 60)
    dense = resample_spline(trace_from_E(d, f(d)))
    assert np.max(np.abs(dense.E_VS - f(dense.d))) < 0.02 * 10


def test_gaps_not_bridged_and_short_runs_passed_through():
    d = 1.4 * np.arange(20)
    valid = np.ones(20, bool)
    valid[8:11] = False
    valid[15] = False
    dense = resample_spline(trace_from_E(d, 30 + 0.1 * d, valid))
    assert dense.d.max() <= d[19] + 1e-9
    # nothing placed strictly inside the invalid gaps
    gap = (dense.d > d[7] + 1e-9) & (dense.d < d[11] - 1e-9)
    assert not gap.any()
    # the run 16..19 has 4 points and is interpolated; the run 11..14 too
    assert np.all(dense.valid)
    with pytest.raises(ValueError):
        resample_spline(trace_from_E(d, 30 + 0 * d), pitch=0)

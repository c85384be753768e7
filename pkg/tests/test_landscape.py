import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from vsmap.analysis.distributions import fit_rician
from vsmap.landscape import (CorrelationModel, LandscapeSpec, RicianParams, ValleyLandscape,
                             covariance_factor, covariance_matrix, gaussian_correlation, grid_axis,
                             load_landscape, rician_field, save_landscape, synthesize_gaussian_field,
                             synthesize_landscape)


def test_correlation_at_zero_and_1_over_e():
    m = CorrelationModel(16.0)
    assert gaussian_correlation(0.0, m) == 1.0
    assert gaussian_correlation(math.sqrt(4 - math.pi) * 16.0, m) == pytest.approx(1 / math.e, abs=1e-12)


def test_correlation_rejects_negative_distance():
    with pytest.raises(ValueError):
        gaussian_correlation(-1.0, CorrelationModel())


def test_orbital_energy_pairing():
    assert CorrelationModel(16.0).E_orb == pytest.approx(1.6, abs=0.05)


@given(st.floats(0, 500), st.floats(1, 100))
def test_correlation_in_unit_interval(D, a):
    c = gaussian_correlation(D, CorrelationModel(a))
    assert 0 <= c <= 1


def test_single_cell_field_is_standard_normal_draw():
    f = synthesize_gaussian_field(0, 0, 1.4, CorrelationModel(), seed=3)
    assert f.shape == (1, 1)
    assert f[0, 0] == pytest.approx(np.random.default_rng(3).standard_normal(), rel=1e-4)


def test_duplicated_points_identical():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0]])
    L = covariance_factor(pts, CorrelationModel())
    z = L @ np.random.default_rng(0).standard_normal(3)
    assert z[0] == pytest.approx(z[1], abs=1e-4)


@pytest.mark.parametrize("n, pitch", [(20, 2.0), (64, 1.4), (150, 1.4)])
def test_factor_reproduces_covariance(n, pitch):
    pts = np.column_stack([pitch * np.arange(n), np.zeros(n)])
    C = covariance_matrix(pts, CorrelationModel())
    L = covariance_factor(pts, CorrelationModel())
    assert np.linalg.norm(L @ L.T - C) / np.linalg.norm(C) < 1e-8


def test_grid_dimension_rule():
    assert len(grid_axis(210, 1.4)) == 151
    assert len(grid_axis(18, 1.4)) == 14
    with pytest.raises(ValueError):
        synthesize_gaussian_field(10, 10, 0, CorrelationModel())


def test_too_large_grid_rejected():
    with pytest.raises(ValueError, match="too large"):
        synthesize_gaussian_field(1000, 1000, 1.0, CorrelationModel())


def test_monte_carlo_lag_correlation():
    # 64-point line, 500 seeds: correlation at 14.8 nm lag should be 1/e
    pitch = 14.8 / 8
    fields = np.array([synthesize_gaussian_field(63 * pitch, 0, pitch, CorrelationModel(16.0), seed=s)[:, 0]
                       for s in range(500)])
    a, b = fields[:, :-8].ravel(), fields[:, 8:].ravel()
    r = np.corrcoef(a, b)[0, 1]
    # neighbouring pairs are correlated; use the per-seed spread as the standard error
    per_seed = np.array([np.corrcoef(f[:-8], f[8:])[0, 1] for f in fields])
    se = per_seed.std(ddof=1) / math.sqrt(len(per_seed))
    assert abs(r - 1 / math.e) < 3 * max(se, 0.01)
    assert abs(fields.mean()) < 0.05
    assert fields.std() == pytest.approx(1.0, abs=0.05)


def test_rician_field_constant_for_zero_noise():
    z = np.zeros((4, 5))
    np.testing.assert_array_equal(rician_field(z, z, RicianParams(35.4, 13.6)), 35.4)
    with pytest.raises(ValueError):
        rician_field(np.zeros(3), np.zeros(4), RicianParams())


def test_rayleigh_marginal_ks():
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((2, 10_000))
    E = rician_field(X, Y, RicianParams(0.0, 13.6))
    res = stats.kstest(E, stats.rayleigh(scale=13.6).cdf)
    assert res.pvalue > 0.01


def test_rician_mean_matches_numeric_first_moment():
    rng = np.random.default_rng(2)
    X, Y = rng.standard_normal((2, 100_000))
    p = RicianParams(35.4, 13.6)
    E = rician_field(X, Y, p)
    pdf = lambda e: stats.rice.pdf(e, p.gamma / p.sigma, scale=p.sigma)
    mean, _ = integrate.quad(lambda e: e * pdf(e), 0, p.gamma + 15 * p.sigma)
    assert abs(E.mean() - mean) < 3 * E.std() / math.sqrt(E.size)


@given(st.floats(0, 60), st.floats(0.5, 30), st.integers(0, 2**31 - 1))
def test_rician_field_nonnegative(gamma, sigma, seed):
    X, Y = np.random.default_rng(seed).standard_normal((2, 200))
    assert np.all(rician_field(X, Y, RicianParams(gamma, sigma)) >= 0)


@pytest.mark.parametrize("gamma, sigma", [(0.0, 10.0), (35.4, 13.6), (5.0, 20.0)])
def test_rician_chi_square_goodness_of_fit(gamma, sigma):
    rng = np.random.default_rng(11)
    X, Y = rng.standard_normal((2, 10_000))
    E = rician_field(X, Y, RicianParams(gamma, sigma))
    dist = stats.rice(gamma / sigma, scale=sigma)
    edges = dist.ppf(np.linspace(0, 1, 21))
    edges[-1] = np.inf
    obs, _ = np.histogram(E, edges)
    res = stats.chisquare(obs, np.full(20, E.size / 20))
    assert res.pvalue > 0.01


def test_landscape_zero_spread_and_determinism(tmp_path):
    spec = LandscapeSpec(x_extent=30, y_extent=6, delta_g_spread=0.0)
    a = synthesize_landscape(spec, 5)
    b = synthesize_landscape(spec, 5)
    assert np.all(a.delta_g_grid == spec.delta_g_mean)
    assert np.all(a.v_grid == 0.08)
    np.testing.assert_array_equal(a.E_VS_grid, b.E_VS_grid)
    pa = save_landscape(a, tmp_path / "a")
    pb = save_landscape(b, tmp_path / "b")
    for k in pa:
        assert pa[k].read_bytes() == pb[k].read_bytes()
    c = load_landscape(tmp_path / "a")
    np.testing.assert_array_equal(c.E_VS_grid, a.E_VS_grid)
    np.testing.assert_array_equal(c.x, a.x)


def test_default_landscape_rician_recovery():
    # pool several seeds: one 210 x 18 nm map holds only a few dozen independent cells
    spec = LandscapeSpec()
    E = np.concatenate([synthesize_landscape(spec, s).E_VS_grid[::4, ::4].ravel() for s in range(40)])
    params, rep = fit_rician(E)
    # spatial correlation inflates the variance; use the empirical seed-to-seed spread as SE
    assert abs(params.gamma - 35.4) < 3 * max(rep.uncertainties[0], 2.0)
    assert abs(params.sigma - 13.6) < 3 * max(rep.uncertainties[1], 1.5)


def test_sample_at_nodes_and_midpoints():
    x = np.array([0.0, 1.4, 2.8])
    y = np.array([0.0, 1.4])
    land = ValleyLandscape.from_functions(x, y, lambda X, Y: 10 + 10 * X / 1.4)
    assert land.sample_at(1.4, 0.0)[0] == 20.0
    assert land.sample_at(0.7, 0.7)[0] == pytest.approx(15.0)
    flat = ValleyLandscape.from_functions(x, y, 42.0)
    assert flat.sample_at(2.1, 0.3)[0] == pytest.approx(42.0)
    with pytest.raises(ValueError):
        land.sample_at(3.0, 0.0)

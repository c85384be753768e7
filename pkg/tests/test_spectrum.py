import numpy as np
import pytest

from vsmap.analysis.spectrum import (fit_anticrossing_spectrum, params_from_report, spectrum_cost,
                                     swap_labels)
from vsmap.physics import TABLE1, SpinValleyParams, precession_frequency

B = np.linspace(0.3, 0.7, 60)


def test_zero_noise_recovery():
    nu = precession_frequency(TABLE1, B)
    rep = fit_anticrossing_spectrum(B, nu, 1e5)
    p = params_from_report(rep)
    if p.delta_g < 0:
        p = swap_labels(p)
    np.testing.assert_allclose(p.as_array(), TABLE1.as_array(), rtol=1e-5)
    assert rep.cost < 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_noisy_recovery_within_tolerances(seed):
    rng = np.random.default_rng(seed)
    nu = precession_frequency(TABLE1, B) + rng.normal(0, 1e5, B.size)
    p = params_from_report(fit_anticrossing_spectrum(B, nu, 1e5))
    if p.delta_g < 0:
        p = swap_labels(p)
    assert abs(p.E_l - 66.64) < 0.5 and abs(p.E_r - 53.52) < 0.5
    assert abs(p.delta_g - 6.58e-4) < 1e-5
    assert p.v_l == pytest.approx(0.058, rel=0.25)
    assert p.v_r == pytest.approx(0.082, rel=0.25)


def test_swapped_labels_same_cost():
    nu = precession_frequency(TABLE1, B) + np.random.default_rng(3).normal(0, 1e5, B.size)
    assert spectrum_cost(TABLE1, B, nu, 1e5) == pytest.approx(spectrum_cost(swap_labels(TABLE1), B, nu, 1e5),
                                                               rel=1e-12)
    # starting from the swapped assignment reaches the same minimum
    a = fit_anticrossing_spectrum(B, nu, 1e5, x0=TABLE1)
    b = fit_anticrossing_spectrum(B, nu, 1e5, x0=swap_labels(TABLE1))
    assert a.cost == pytest.approx(b.cost, rel=1e-6)
    assert "arbitrary" in a.flags["label_assignment"]


def test_single_feature_under_determined():
    Bs = np.linspace(0.3, 0.5, 40)
    nu = precession_frequency(TABLE1, Bs)
    rep = fit_anticrossing_spectrum(Bs, nu, 1e5)
    assert rep.flags["under_determined"]


def test_input_validation():
    with pytest.raises(ValueError):
        fit_anticrossing_spectrum(B[:4], B[:4])
    with pytest.raises(ValueError):
        fit_anticrossing_spectrum(B, B, sigma=0.0)

"""Inverse pipeline: from simulated or measured maps back to valley parameters."""
from .correlation import CorrelationBin, CorrelationFit, binned_correlation, fit_correlation_model, pearson
from .distributions import (fit_folded_gaussian, fit_rician, folded_gaussian_pdf, log_i0,
                            rician_pdf, sample_folded_gaussian, sample_rician)
from .mapping import ValleyMap2D, assemble_2d_map, load_map2d, save_map2d
from .oscillation import OscillationFit, fit_columns, fit_oscillation, oscillation_model
from .ridge import (DenseTrace, RidgeTrace, extract_ridge, load_ridge, resample_spline,
                    ridge_rms_error, save_ridge)
from .spectrum import fit_anticrossing_spectrum, params_from_report, spectrum_cost, swap_labels

__all__ = [name for name in dir() if not name.startswith("_")]

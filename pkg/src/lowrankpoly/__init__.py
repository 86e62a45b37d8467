"""Learning low-rank polynomials over Gaussian covariates.

Trimmed PCA gives a warm start for the hidden subspace; alternating
coefficient refits and geodesic SGD on the Grassmannian then drive the
subspace and coefficients to high accuracy.
"""
from .errors import CalibrationError, ConfigError, DivergenceError, NumericalGuardError, OrthonormalityError
from .geosgd import BoostConfig, GeodesicStep, apply_geodesic, compute_geodesic_step, geo_sgd, realign_polynomial, subspace_descent
from .hermite import CoefficientVector, MultiIndex, basis, hermite_variance, linearization_coeff, multi_index_space, oscillator_eval, phi_eval, poly_eval, poly_gradient
from .model import (
    BatchOracle,
    Instance,
    Parameters,
    SampleBatch,
    SampleOracle,
    certify_nondegeneracy,
    grad_coef,
    grad_frame,
    gradient_second_moment,
    make_instance,
    predict,
    prediction_error,
    random_instance,
    rotate_coefficients,
    sample_batch,
)
from .subspace import Frame, align, chordal_distance, principal_angles, procrustes_distance, projection_mass, random_frame
from .trimmed_pca import TrimConfig, calibrate_threshold, empirical_trimmed_matrix, top_eigenpair, trimmed_pca

__version__ = "0.1.0"

"""Causal predictors for anticausal convolution functionals."""

from ._core import (
    HorizonKernel,
    NumericalRejection,
    PredictorSpec,
    Process,
    TimeGrid,
    band_limited_process,
    convergence_study,
    counterexample_te,
    eval_h,
    eval_V,
    from_samples,
    gamma_for_band,
    gaussian_mixture,
    membership_mc,
    membership_nc,
    membership_x,
    predict_spectral,
    predict_time,
    run,
    sha256_hex,
    snapshot_estimate,
    synthesize,
    target_output,
    uniformity_study,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Coupled-posterior variational autoencoders."""

from ._core import (
    ConfigError,
    ContractError,
    FormatError,
    NumericError,
    SingularityError,
    ari,
    assemble_covariance,
    classification_metrics,
    coupling_log_abs_det,
    effective_mean,
    evaluate,
    expected_calibration_error,
    kl_divergence,
    mse_per_pixel,
    nmi,
    render_recon,
    render_sweep,
    reparameterize,
    sweep,
    sweep_mesh,
    synth_blobs,
    train,
    train_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]

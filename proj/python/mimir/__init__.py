"""Phenotype regression with calibrated uncertainty from two-channel body volumes."""

from ._core import (
    FormatError,
    IoError,
    Model,
    ValidationError,
    auc_roc,
    confidence_interval,
    cross_validate,
    default_config,
    icc_2_1,
    load_volume,
    mae_mape,
    nll_loss,
    normal_quantile,
    phantom_subject,
    phantom_targets,
    project,
    r_squared,
    resize_tile,
    save_volume,
    train,
    write_phantom_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "IoError",
    "Model",
    "ValidationError",
    "auc_roc",
    "confidence_interval",
    "cross_validate",
    "default_config",
    "icc_2_1",
    "load_volume",
    "mae_mape",
    "nll_loss",
    "normal_quantile",
    "phantom_subject",
    "phantom_targets",
    "project",
    "r_squared",
    "resize_tile",
    "save_volume",
    "train",
    "write_phantom_dataset",
]

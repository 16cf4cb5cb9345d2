"""Rank-one image decomposition and restoration toolkit (C++ core)."""

from ._ronet import (
    ArgumentError,
    CheckpointError,
    ConfigError,
    ContractError,
    IoError,
    ShapeError,
    awgn,
    bicubic_downsample,
    format_psnr,
    load_checkpoint,
    load_png,
    motion_blur,
    poisson_noise,
    psnr,
    rank_one_defect,
    restore,
    ro_component_psnr,
    run_cli,
    save_checkpoint,
    save_png,
    shifted_max_psnr,
    ssim,
    svd_decompose,
    y_channel,
    y_channel_psnr,
)

__all__ = [
    "ArgumentError",
    "CheckpointError",
    "ConfigError",
    "ContractError",
    "IoError",
    "ShapeError",
    "awgn",
    "bicubic_downsample",
    "format_psnr",
    "load_checkpoint",
    "load_png",
    "motion_blur",
    "poisson_noise",
    "psnr",
    "rank_one_defect",
    "restore",
    "ro_component_psnr",
    "run_cli",
    "save_checkpoint",
    "save_png",
    "shifted_max_psnr",
    "ssim",
    "svd_decompose",
    "y_channel",
    "y_channel_psnr",
]

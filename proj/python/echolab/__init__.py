"""Skew-normal trajectory inference and echo prediction (C++ core)."""

from ._echolab import (
    SkewNormalParams,
    density,
    detect_plateau,
    echo_amplitude,
    free_dephasing,
    hole_width_curve,
    instrumental_width,
    is_valid,
    marginal_2d,
    averaged_params,
    run_command,
    sample,
    tau_grid,
)

__all__ = [
    "SkewNormalParams",
    "density",
    "detect_plateau",
    "echo_amplitude",
    "free_dephasing",
    "hole_width_curve",
    "instrumental_width",
    "is_valid",
    "marginal_2d",
    "averaged_params",
    "run_command",
    "sample",
    "tau_grid",
]

"""Variable impedance teleoperation simulator.

Configuration everywhere is INI text plus optional ``{"section.key": value}``
overrides, the same keys the ``viasim`` command accepts.
"""

from ._core import (
    ConfigError,
    InvalidArgument,
    Session,
    SimulationError,
    __version__,
    analyze,
    damping_law,
    default_config,
    impedance,
    median_difference_ci,
    percentile_midpoint,
    resolve_config,
    run_experiment,
    run_trial,
    stiffness_law,
    sweep,
    wilcoxon,
)

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "Session",
    "SimulationError",
    "__version__",
    "analyze",
    "damping_law",
    "default_config",
    "impedance",
    "median_difference_ci",
    "percentile_midpoint",
    "resolve_config",
    "run_experiment",
    "run_trial",
    "stiffness_law",
    "sweep",
    "wilcoxon",
]

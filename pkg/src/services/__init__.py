"""Service layer entrypoints, one per subcommand."""

from .pipeline import (
    COMMANDS,
    run_bands,
    run_calibrate,
    run_dense_check,
    run_depth_scan_command,
    run_oracle,
    run_plot,
    run_solve,
    run_sweep_command,
)

__all__ = [
    "COMMANDS",
    "run_bands",
    "run_calibrate",
    "run_dense_check",
    "run_depth_scan_command",
    "run_oracle",
    "run_plot",
    "run_solve",
    "run_sweep_command",
]

"""Ballistic transport experiments for limit-periodic and quasi-periodic Schrodinger operators."""

from ._core import (
    BallisticError,
    ConfigError,
    check_a1,
    check_a2,
    free_transport,
    read_packet,
    run_config,
    sha256_hex,
    solve_branch,
)

__all__ = [
    "BallisticError",
    "ConfigError",
    "check_a1",
    "check_a2",
    "free_transport",
    "read_packet",
    "run_config",
    "sha256_hex",
    "solve_branch",
]

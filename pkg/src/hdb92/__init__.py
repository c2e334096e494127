"""Asymptotic key-rate analysis of the high-dimensional extended B92 protocol."""

from .channels import (
    KrausSet,
    ObservedStats,
    ProtocolConfig,
    amplitude_damping_kraus,
    depolarizing_kraus,
    depolarizing_stats,
    load_stats,
    stats_from_channel,
)
from .keyrate import KeyRateResult, bb84_rate, key_rate, noise_threshold, sweep, threshold
from .oracle import verify_bound

__version__ = "0.1.0"

__all__ = [
    "KeyRateResult",
    "KrausSet",
    "ObservedStats",
    "ProtocolConfig",
    "amplitude_damping_kraus",
    "bb84_rate",
    "depolarizing_kraus",
    "depolarizing_stats",
    "key_rate",
    "load_stats",
    "noise_threshold",
    "stats_from_channel",
    "sweep",
    "threshold",
    "verify_bound",
]

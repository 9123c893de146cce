"""Uniform streams, forward simulation and monotone coupling from the past."""

from src.cftp.engine import (
    CftpResult,
    CoupledSample,
    Method,
    NotCoalesced,
    coalescence_time,
    coupled_perfect_sample,
    forward_simulate,
    kernel_regeneration_time,
    perfect_sample,
    regeneration_time,
)
from src.cftp.random_stream import RandomnessStream, uniform_at

__all__ = [
    "CftpResult",
    "CoupledSample",
    "Method",
    "NotCoalesced",
    "RandomnessStream",
    "coalescence_time",
    "coupled_perfect_sample",
    "forward_simulate",
    "kernel_regeneration_time",
    "perfect_sample",
    "regeneration_time",
    "uniform_at",
]

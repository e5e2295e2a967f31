"""Decide whether a dataframe aggregation is a homomorphism, and if so
synthesize its merge operator."""

from __future__ import annotations

from .driver import HOMOMORPHIC, REFUTED, UNKNOWN, Verdict, is_homomorphism, oracle_check
from .frontend import load_program
from .gen import GenConfig
from .synth import Budget

__all__ = [
    "HOMOMORPHIC",
    "REFUTED",
    "UNKNOWN",
    "Budget",
    "GenConfig",
    "Verdict",
    "is_homomorphism",
    "load_program",
    "oracle_check",
]

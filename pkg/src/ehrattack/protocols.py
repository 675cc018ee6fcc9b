"""Structural interfaces the attack code depends on.

Attack modules see victims only through :class:`SurvivalModel`; they never
import the concrete reference models.
"""
from __future__ import annotations

from typing import Protocol, runtime_checkable

from .records import PatientRecord


@runtime_checkable
class SurvivalModel(Protocol):
    """Black-box survival model F: record -> predicted survival time."""

    def predict_time(self, record: PatientRecord) -> float: ...

"""Black-box adversarial attacks on survival models over coded visit sequences."""
from .errors import EHRAttackError
from .records import (ActionKind, AdversarialAction, CodeKind, Cohort, Patient, PatientRecord,
                      SurvivalLabel, Visit)

__version__ = "0.1.0"

__all__ = [
    "ActionKind", "AdversarialAction", "CodeKind", "Cohort", "EHRAttackError", "Patient",
    "PatientRecord", "SurvivalLabel", "Visit", "__version__",
]

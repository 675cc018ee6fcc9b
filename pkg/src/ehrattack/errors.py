"""Exception hierarchy shared across the package."""


class EHRAttackError(Exception):
    """Base class for all package errors."""


class PreconditionViolation(EHRAttackError):
    """An action was applied to a record that cannot accept it."""


class ParseError(EHRAttackError):
    """A file did not match its documented format."""


class StructureError(EHRAttackError):
    """An ontology violates the single-parent forest rules."""


class UnknownCode(EHRAttackError, KeyError):
    """A code id is not known to the ontology or vocabulary."""

    def __str__(self):
        return Exception.__str__(self)


class DegenerateRecord(EHRAttackError):
    """A record has no codes at all, so its embedding is undefined."""


class UntrainedModel(EHRAttackError):
    """A victim model was used before its parameters were set."""


class DegenerateCohort(EHRAttackError):
    """A cohort lacks either censored or observed patients."""


class NonFiniteLoss(EHRAttackError):
    """Training diverged."""


class NoPermissiblePairs(EHRAttackError):
    """No patient pair can be ranked under the censoring rules."""


class NoObservedPatients(EHRAttackError):
    """MAE is undefined without observed patients."""


class ConfigError(EHRAttackError):
    """Invalid or unknown configuration key."""


class CompatibilityError(EHRAttackError):
    """Artifacts produced under different configurations were mixed."""

"""Exception hierarchy shared across the package."""

from __future__ import annotations


class StagewiseError(Exception):
    """Base class for all domain errors raised by this package."""


class DescriptorError(StagewiseError):
    """An architecture descriptor violates a structural invariant."""


class DescriptorParseError(DescriptorError):
    """A serialized descriptor could not be decoded.

    ``field`` names the offending field (or byte position for syntax errors).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"descriptor field '{field}': {message}")
        self.field = field


class CostModelError(StagewiseError):
    """Cost computation failed."""


class MissingCostProfileError(CostModelError):
    """A cell architecture references a cost profile that is not registered."""

    def __init__(self, profile_id: str | None):
        super().__init__(f"no cost profile registered for id {profile_id!r}")
        self.profile_id = profile_id


class ScoringError(StagewiseError):
    """A feature-importance computation failed."""


class ZeroVarianceResponseError(ScoringError):
    """The regression response is constant; no model can be fitted."""


class DegenerateModelError(ScoringError):
    """A fitted model carries no usable signal (e.g. zero explained variance)."""


class SearchError(StagewiseError):
    """The depth-search loop failed."""


class SearchAbortedError(SearchError):
    """An evaluator call failed mid-search.

    The ledger accumulated so far is attached so the run can be resumed from
    its last checkpoint.
    """

    def __init__(self, message: str, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class EvaluatorError(StagewiseError):
    """An evaluator could not produce features for a descriptor."""


class BundleFormatError(EvaluatorError):
    """A feature bundle on disk disagrees with its declared layout."""


class NonFiniteFeaturesError(EvaluatorError):
    """A feature bundle contains NaN or infinite values."""


class TrainerExitError(EvaluatorError):
    """The subordinate trainer process exited with a nonzero status."""

    def __init__(self, returncode: int, log_excerpt: str = ""):
        super().__init__(
            f"trainer exited with status {returncode}"
            + (f"; log tail:\n{log_excerpt}" if log_excerpt else "")
        )
        self.returncode = returncode
        self.log_excerpt = log_excerpt


class TrainerFailedError(EvaluatorError):
    """The trainer reported state=failed in its status file."""

    def __init__(self, error: str, log_excerpt: str = ""):
        super().__init__(
            f"trainer reported failure: {error}"
            + (f"; log tail:\n{log_excerpt}" if log_excerpt else "")
        )
        self.error = error
        self.log_excerpt = log_excerpt


class TrainerTimeoutError(EvaluatorError):
    """The trainer did not reach a terminal state within the allotted time."""

    def __init__(self, timeout_seconds: float, log_excerpt: str = ""):
        super().__init__(
            f"trainer timed out after {timeout_seconds} seconds"
            + (f"; log tail:\n{log_excerpt}" if log_excerpt else "")
        )
        self.timeout_seconds = timeout_seconds
        self.log_excerpt = log_excerpt


class TransferError(StagewiseError):
    """A weight-transfer plan could not be constructed."""


class StageDepthExceedsDonor(TransferError):
    """A candidate stage is deeper than the donor stage providing weights."""

    def __init__(self, stage: int, candidate_modules: int, donor_modules: int):
        super().__init__(
            f"stage {stage}: candidate has {candidate_modules} modules but donor "
            f"provides only {donor_modules}"
        )
        self.stage = stage
        self.candidate_modules = candidate_modules
        self.donor_modules = donor_modules


class ShapeMismatch(TransferError):
    """Donor and candidate disagree on a structural field required for transfer."""

    def __init__(self, field: str, candidate_value, donor_value):
        super().__init__(
            f"candidate and donor differ on {field}: {candidate_value!r} vs {donor_value!r}"
        )
        self.field = field

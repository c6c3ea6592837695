"""Exception hierarchy for abrplan."""


class AbrPlanError(Exception):
    """Base class for all abrplan errors."""


class InvalidScheduleError(AbrPlanError):
    """A transmission schedule used bits it could not have (e.g. on a
    zero-capacity slot, or more than the slot's volume)."""


class InfeasiblePlanError(AbrPlanError):
    """Strict evaluation of a (threshold, plan) pair hit a stall or an
    incomplete delivery."""


class NoFeasibleSessionError(AbrPlanError):
    """Even the lowest-quality greedy session cannot be streamed without a
    stall on the given capacity window."""


class InfeasiblePartError(NoFeasibleSessionError):
    """One part of a stall-partitioned session is infeasible.

    ``part_index`` is the 0-based index of the failing part.
    """

    def __init__(self, part_index: int, message: str = ""):
        self.part_index = part_index
        super().__init__(message or f"part {part_index} of the partitioned session is infeasible")


class OracleBudgetError(AbrPlanError):
    """The exhaustive planner refused an instance whose search tree exceeds
    the configured node budget."""


class TraceIngestError(AbrPlanError):
    """A bandwidth log file failed validation.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingColumnError(TraceIngestError):
    """A declared column is absent from the CSV header."""


class NonMonotonicTimestampError(TraceIngestError):
    """Timestamps must be strictly increasing."""


class StationaryLogError(AbrPlanError):
    """The log covers zero distance; spatial-to-temporal mapping is
    undefined. Slot the log directly on its own timestamps instead."""


class TraceFormatError(AbrPlanError):
    """A trace CSV file does not match the expected export format."""

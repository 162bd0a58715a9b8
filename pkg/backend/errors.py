"""
Error Hierarchy

Every failure raised by the library derives from GpcsError. Each class carries
the exit code the command-line entry point uses for its category:

    0 ok, 1 usage/argument, 2 data/parse, 3 training or solver divergence,
    4 stage dependency
"""

from typing import List, Optional


class GpcsError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ArgumentError(GpcsError, ValueError):
    """Invalid argument, shape mismatch or violated precondition."""

    exit_code = 1


class DegenerateSignalError(ArgumentError):
    """A finite SNR target was requested for a signal with Ax = 0."""


class EvaluationError(GpcsError):
    """A differentiable expression could not be evaluated (e.g. log of a non-positive value)."""

    exit_code = 3

    def __init__(self, message: str, node: Optional[str] = None):
        super().__init__(message)
        self.node = node


# ========================================
# FILE FORMAT ERRORS
# ========================================

class WeightsFormatError(GpcsError):
    """Malformed GPCS weights file."""

    exit_code = 2

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class WeightsMagicError(WeightsFormatError):
    pass


class WeightsVersionError(WeightsFormatError):
    pass


class WeightsTruncatedError(WeightsFormatError):
    pass


class IdxParseError(GpcsError):
    """Malformed IDX container."""

    exit_code = 2


class IdxMagicError(IdxParseError):
    pass


class IdxTruncatedError(IdxParseError):
    pass


class IdxDimensionError(IdxParseError):
    pass


class IdxLengthError(IdxParseError):
    pass


class ConfigFormatError(GpcsError):
    """Experiment file that does not parse, or does not hold a mapping."""

    exit_code = 2


class DatasetStateError(GpcsError):
    """Operation not valid for the dataset's current pixel range."""

    exit_code = 2


# ========================================
# NUMERICAL FAILURES
# ========================================

class TrainingDivergenceError(GpcsError):
    """A training loss became non-finite."""

    exit_code = 3

    def __init__(self, message: str, epoch: int = -1, batch: int = -1,
                 loss_trace: Optional[List[float]] = None):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch
        self.loss_trace = list(loss_trace or [])


class SolverError(GpcsError):
    """A reconstruction solver produced a non-finite value."""

    exit_code = 3

    def __init__(self, message: str, iteration: int = -1):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class EstimationError(GpcsError):
    """Empirical certification had no usable samples."""

    exit_code = 3


class DependencyError(GpcsError):
    """A pipeline stage was requested before its prerequisites exist."""

    exit_code = 4

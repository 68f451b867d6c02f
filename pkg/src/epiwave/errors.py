"""Exception hierarchy.

Every error carries the process exit code the command line maps it to:
2 for configuration/argument problems, 3 for bad input data, 4 for
numerical breakdowns.
"""

from __future__ import annotations


class EpiwaveError(Exception):
    exit_code = 1


class ConfigError(EpiwaveError, ValueError):
    exit_code = 2


class InvalidWindowError(ConfigError):
    pass


class InvalidHorizonError(ConfigError):
    pass


class InvalidPriorError(ConfigError):
    pass


class DataError(EpiwaveError, ValueError):
    exit_code = 3


class EmptyInputError(DataError):
    pass


class RegionNotFoundError(DataError):
    def __init__(self, region: str):
        super().__init__(f"region not found: {region!r}")
        self.region = region


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.row = row
        self.column = column


class InvalidPopulationError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class UndefinedMapeError(DataError):
    def __init__(self, zero_days):
        self.zero_days = list(zero_days)
        super().__init__(f"MAPE undefined: actual value is zero on days {self.zero_days}")


class NumericalError(EpiwaveError, ArithmeticError):
    exit_code = 4


class InvalidSigmaError(NumericalError, ValueError):
    pass


class DegenerateUpdateError(NumericalError):
    def __init__(self, message: str = "all particle likelihoods underflowed", day: int | None = None):
        if day is not None:
            message = f"{message} (day {day})"
        super().__init__(message)
        self.day = day


class CalibrationInfeasibleError(NumericalError):
    def __init__(self, message: str, best_threshold: float, best_mean_time: float):
        super().__init__(
            f"{message}; best bound: h={best_threshold:.4g} gives mean false-alarm time "
            f">= {best_mean_time:.4g} days"
        )
        self.best_threshold = best_threshold
        self.best_mean_time = best_mean_time

"""Exception hierarchy.

Errors are grouped so the CLI can map them onto exit codes: configuration
problems exit 1, data problems exit 2, anything else exits 3.  Model-level
failures (``ModelError``) are caught by the harness and turned into missing
predictions instead of aborting a run.
"""


class MacrocastError(Exception):
    """Base class for every error raised by this package."""


class ConfigInvalid(MacrocastError):
    pass


class DataError(MacrocastError):
    pass


class RangeOutOfBounds(DataError):
    pass


class EmptyPeriod(DataError):
    pass


class MalformedRow(DataError):
    pass


class DuplicateMonth(DataError):
    pass


class MissingColumn(DataError):
    pass


class WrongSeriesCount(DataError):
    pass


class UnbalancedPanel(DataError):
    """Raised when aligned series have holes; ``holes`` lists (series, month) pairs."""

    def __init__(self, holes):
        self.holes = list(holes)
        shown = ", ".join(f"({name}, {month})" for name, month in self.holes[:20])
        more = "" if len(self.holes) <= 20 else f" ... and {len(self.holes) - 20} more"
        super().__init__(f"panel is unbalanced; missing {shown}{more}")


class PanelUnreadable(DataError):
    pass


class PanelTooShort(DataError):
    pass


class DatasetTooShort(DataError):
    pass


class ModelError(MacrocastError):
    """A model could not be fitted or evaluated on the data it was given."""


class DegenerateColumn(ModelError):
    pass


class TooFewRows(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class NonFiniteLoss(ModelError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MinimumRows(ModelError):
    pass


class SingularSystem(ModelError):
    pass


class TrainingTooShort(ModelError):
    pass


class NonStationaryFit(ModelError):
    pass


class RankDeficientExogenous(ModelError):
    pass


class HorizonMismatch(ModelError):
    pass


class MetricError(MacrocastError):
    pass


class NoPredictions(MetricError):
    pass


class NonPositiveTestMean(MetricError):
    pass


class OutputUnwritable(MacrocastError):
    pass

"""Exception types raised across the package."""


class DdfreqError(Exception):
    """Base class for all package errors."""


class DimensionError(DdfreqError, ValueError):
    pass


class MarginallyStable(DdfreqError):
    """``I - A`` is singular, so the DC gain does not exist."""


class DepthExceedsData(DdfreqError, ValueError):
    pass


class InconsistentDataset(DdfreqError, ValueError):
    pass


class EmptyTruncation(DdfreqError, ValueError):
    pass


class DcGainIdentificationFailed(DdfreqError):
    pass


class InfeasibleInitialization(DdfreqError):
    """The fixed (past) rows of the regularized estimator cannot be matched."""


class NumericalDivergence(DdfreqError):
    def __init__(self, message, area=None):
        super().__init__(message)
        self.area = area


class DatasetRequired(DdfreqError):
    pass


class ConfigError(DdfreqError, ValueError):
    pass

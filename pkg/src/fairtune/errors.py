"""Exception types shared across the package."""


class FairtuneError(Exception):
    """Base class for all package errors."""


class ConfigError(FairtuneError):
    """A configuration file or argument is invalid or incomplete."""


class DegenerateSplitError(FairtuneError):
    """A split lacks a required subgroup or label class."""


class DegenerateBatchError(FairtuneError):
    """No valid tuning batch could be drawn within the retry budget."""


class DegenerateGroupError(FairtuneError):
    """Group statistics were requested on data containing a single group."""


class UndefinedMetricError(FairtuneError):
    """A metric's underlying rate has a zero denominator."""

    def __init__(self, metric: str, reason: str = ""):
        self.metric = metric
        msg = f"metric {metric!r} is undefined"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class OutOfRangeError(FairtuneError):
    """A raw metric value lies outside its declared bounds."""


class ShapeError(FairtuneError):
    """Input dimensions do not match a model's shape descriptor."""


class DivergenceError(FairtuneError):
    """A loss or gradient became non-finite during optimisation."""

    def __init__(self, message: str, epoch: int | None = None):
        self.epoch = epoch
        super().__init__(message)

class SteeringError(ValueError):
    """Base class for every error raised by the steering library."""


class ValidationError(SteeringError):
    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        message = f"constraint '{constraint}' violated"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class DimensionMismatchError(SteeringError):
    pass


class SearchSpaceTooLargeError(SteeringError):
    def __init__(self, count: int, limit: float):
        self.count = count
        self.limit = limit
        super().__init__(
            f"search space of {count} strategies exceeds the limit of {int(limit)}"
        )


class KTooSmallError(SteeringError):
    def __init__(self, min_eigenvalue: float, K: float, setting: int):
        self.min_eigenvalue = min_eigenvalue
        self.K = K
        self.setting = setting
        super().__init__(
            f"K={K} too small: complement effect of setting {setting} has "
            f"min eigenvalue {min_eigenvalue:.3e}"
        )


class DegenerateDenominatorError(SteeringError):
    pass


class UndefinedThresholdError(SteeringError):
    pass

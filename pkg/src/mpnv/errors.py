"""Exception types shared across the package."""


class MpnvError(Exception):
    """Base class for all package errors."""


class DimensionError(MpnvError):
    """Vector lengths do not match the instance horizon."""


class ParameterError(MpnvError):
    """Invalid model or instance parameters."""


class DomainError(MpnvError):
    """Special-function argument outside its domain."""


class MultiplierRangeError(MpnvError):
    """Lagrange multiplier outside [0, nu_upper_bound]; a KKT fractile left [0, 1]."""


class DegenerateSampleError(MpnvError):
    """Sample admits no valid MLE (zero variance or zero rate)."""


class AmbiguityConstructionError(MpnvError):
    """Confidence-set filtering produced an empty ambiguity set."""


class ResourceLimitError(MpnvError):
    """Search/state space exceeds the configured limit."""


class InfeasibleInstanceError(MpnvError):
    """No feasible order plan exists (requires W < 0)."""

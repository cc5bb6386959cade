"""Exception hierarchy shared across the estimation stages."""


class GroupMteError(Exception):
    """Base class for all package-specific errors."""


class DataError(GroupMteError):
    """Invalid or inconsistent input data (bad treatment codes, NaN outcomes, ragged layouts)."""


class ConfigError(GroupMteError):
    """Invalid command-line or configuration-file parameters."""


class SeparationError(GroupMteError):
    """Perfect separation detected while fitting a probit stage."""


class DegenerateError(GroupMteError):
    """A fit was requested on data with no variation (e.g. constant treatment)."""


class RankDeficientError(GroupMteError):
    """A regression design matrix has rank lower than its column count."""


class ZeroDenominatorError(GroupMteError):
    """A ratio formula was evaluated where no subpopulation mass shifts."""


class NoMoversError(GroupMteError):
    """A counterfactual policy moves no unit's treatment probability."""


class InfeasiblePolicyError(GroupMteError):
    """A counterfactual policy pushes propensities outside [0, 1]."""


class EmptyWindowError(GroupMteError):
    """A local regression window contains no kernel weight."""


class SingularWindowError(GroupMteError):
    """A local regression design is rank-deficient within the kernel window."""


class InsufficientOverlapError(GroupMteError):
    """No propensity cell contains enough observations on both instrument splits."""


class BoundaryWarning(UserWarning):
    """An estimate landed on (or within tolerance of) the edge of its parameter space."""


class ConditionNumberWarning(UserWarning):
    """A least-squares design is poorly conditioned."""

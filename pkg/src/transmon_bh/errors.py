"""Exception hierarchy. Each error carries a short category used by the CLI."""


class TransmonError(Exception):
    category = "error"


class InvalidSizeError(TransmonError, ValueError):
    category = "invalid-size"


class InvalidRuleError(TransmonError, ValueError):
    category = "invalid-rule"


class CapacityError(TransmonError):
    category = "capacity"


class MembershipError(TransmonError, ValueError):
    category = "membership"


class BasisError(TransmonError, ValueError):
    category = "basis"


class NormalizationError(TransmonError, ValueError):
    category = "normalization"


class ConvergenceError(TransmonError):
    category = "convergence"


class ManifoldError(TransmonError, ValueError):
    category = "manifold"


class SequencingError(TransmonError, ValueError):
    category = "sequencing"


class DomainError(TransmonError, ValueError):
    category = "domain"


class GeometryError(TransmonError, ValueError):
    category = "unsupported-geometry"


class GridError(TransmonError, ValueError):
    category = "grid"


class ConfigError(TransmonError, ValueError):
    category = "config"

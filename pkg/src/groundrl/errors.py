"""Exception hierarchy shared across the package.

Plain precondition violations raise ``ValueError`` at the call site; the
classes here exist where callers (notably the CLI) need to tell input
problems apart from internal ones.
"""


class GroundrlError(Exception):
    """Base class for package-specific errors."""


class ConfigError(GroundrlError):
    """Invalid or unresolvable configuration."""


class DataError(GroundrlError):
    """Malformed manifest, unreadable image, or inconsistent annotation."""


class CoordSpaceError(GroundrlError):
    """Operation mixing boxes from different coordinate spaces."""


class TransformError(GroundrlError):
    """Affine rewrite collapsed a box to zero area after rounding."""


class TrainingDiverged(GroundrlError):
    """Non-finite policy parameters encountered during optimization."""

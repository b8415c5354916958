"""Exception hierarchy shared across the package."""


class HeisCalcError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(HeisCalcError):
    """Operands belong to different groups or have incompatible sizes."""


class DegreeMismatchError(HeisCalcError):
    """Vector/covector degrees do not match."""


class IncompatibleBumpError(HeisCalcError):
    """Arithmetic on scalars whose bump supports cannot be combined."""


class CharacteristicPointError(HeisCalcError):
    """The wedge of horizontal gradients degenerates at a sample point."""


class MembershipError(HeisCalcError):
    """A form fails the subspace-regime membership conditions."""


class InvalidPatchError(HeisCalcError):
    """A submanifold patch violates its declared invariants."""


class SceneValidationError(HeisCalcError):
    """A scene file is syntactically valid but semantically inconsistent."""


class SceneParseError(HeisCalcError):
    """A scene file cannot be parsed (bad syntax or unknown keys)."""

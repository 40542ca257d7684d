"""Exception hierarchy shared by all armsynth modules."""


class ArmSynthError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ArmSynthError):
    """A document could not be decoded or is missing required fields."""


class ValidationError(ArmSynthError):
    """A decoded document violates an invariant (names the offending id)."""


class UnknownIdError(ValidationError):
    """A part, rule, or obstacle id does not resolve."""


class DimensionError(ArmSynthError):
    """A joint-angle vector does not match the design's degree of freedom."""


class IncompatibleRuleError(ValidationError):
    """A connection rule cannot be applied at the current chain tip."""

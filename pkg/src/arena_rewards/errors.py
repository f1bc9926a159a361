"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A numeric parameter is outside its valid domain."""


class StateError(ValueError):
    """A game state (or pair of states) is inconsistent with the request."""


class SpecError(ValueError):
    """A reward spec is malformed or references an unknown component."""


class SchemaError(ValueError):
    """An input file does not match the expected layout."""

class FedFeatError(Exception):
    """Base class for all package errors."""


class DataError(FedFeatError, ValueError):
    """Input data is malformed or violates a precondition."""


class ConfigError(FedFeatError, ValueError):
    """A configuration or command-line option is invalid."""


class UnknownNodeError(FedFeatError, KeyError):
    """A message was addressed to or from a node the transport does not know."""


class CandidateSpaceExhausted(FedFeatError):
    """Every candidate transformation has already been judged."""


class MissingJudgeError(FedFeatError, KeyError):
    """The server holds no judge for the requested transformation."""

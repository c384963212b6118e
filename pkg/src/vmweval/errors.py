"""Exception taxonomy shared by every pipeline stage.

ContractViolation covers bad inputs and broken invariants (CLI exit code 1),
TransportError covers backend connectivity (exit code 2).
"""


class ContractViolation(ValueError):
    """An input, configuration or invariant check failed."""


class ParseError(ContractViolation):
    """Malformed corpus or lexicon input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaVersionError(ContractViolation):
    """A stage input was produced under an incompatible schema version."""


class BackendContractError(ContractViolation):
    """A backend answered, but outside its declared contract."""


class UnparseableResponse(ContractViolation):
    """A model response carried no recognizable answer token."""

    def __init__(self, message, raw_response=""):
        super().__init__(message)
        self.raw_response = raw_response


class TransportError(RuntimeError):
    """A backend call failed after the retry allowance."""

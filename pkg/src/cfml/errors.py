"""Exception hierarchy shared across the package."""


class CfmlError(Exception):
    """Base class for all errors raised by this package."""


class GrammarError(CfmlError):
    """A grammar value violates a structural invariant."""


class GrammarTextError(GrammarError):
    """A grammar or transducer file is malformed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseForestError(CfmlError):
    """A parse forest is inconsistent with the grammar it claims to use."""


class ContractViolation(CfmlError):
    """An operation was invoked outside its stated preconditions."""


class InternalError(CfmlError):
    """A postcondition the implementation relies on failed to hold."""

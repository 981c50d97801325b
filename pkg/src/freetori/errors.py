"""Exception types shared across the package.

The CLI maps these onto exit codes: parse errors exit 1, precondition
violations exit 2, exhausted caps exit 3.
"""


class FreeToriError(Exception):
    pass


class ParseError(FreeToriError, ValueError):
    pass


class PreconditionError(FreeToriError, ValueError):
    pass


class AlphabetMismatch(PreconditionError):
    pass


class NotInjective(PreconditionError):
    pass


class CapExceeded(FreeToriError, RuntimeError):
    pass

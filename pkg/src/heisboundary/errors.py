"""Exception hierarchy.

Input problems (bad files, unsupported derivations) derive from `InputError`;
numerical breakdowns derive from `NumericError`.  The CLI maps the first to
exit code 1 and the second to exit code 2.
"""


class HeisError(Exception):
    pass


class InputError(HeisError, ValueError):
    pass


class NumericError(HeisError, ArithmeticError):
    pass


class DimensionError(InputError):
    pass


class SpecSyntaxError(InputError):
    pass


class SchemaError(InputError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidDerivation(InputError):
    pass


class NonDiagonalizable(InvalidDerivation):
    pass


class ComplexSpectrum(InvalidDerivation):
    pass


class NonPositiveEigenvalue(InvalidDerivation):
    pass


class CenterMismatch(InvalidDerivation):
    pass


class NotEquivalent(InputError):
    pass


class HypothesisViolated(InputError):
    pass


class OutOfBox(InputError):
    pass


class NotInSubgroup(InputError):
    pass


class DegeneratePairing(NumericError):
    pass

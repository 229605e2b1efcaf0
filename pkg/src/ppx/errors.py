"""Exception hierarchy.

``SpecError`` covers anything the user can fix by editing a config; the
``NumericalGuardError`` family is raised when a computation is refused or
cannot complete (runaway point counts, singular path loss, quadrature that
does not converge). The CLI maps the first to exit code 1, the second to 2.
"""


class PpxError(Exception):
    pass


class SpecError(PpxError, ValueError):
    pass


class DuplicatePointError(SpecError):
    pass


class NumericalGuardError(PpxError, ArithmeticError):
    pass


class CapExceededError(NumericalGuardError):
    pass


class SingularPathLossError(NumericalGuardError):
    pass


class QuadratureError(NumericalGuardError):
    pass

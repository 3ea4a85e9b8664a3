"""Exception hierarchy.

Every error carries a stable ``code`` (its class name) so that the CLI can
report it in machine-readable form.
"""


class WavetrajError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    @property
    def code(self):
        return type(self).__name__


class ConfigError(WavetrajError, ValueError):
    """One or more configuration violations.

    ``violations`` is the complete list of ``(code, message)`` pairs found;
    validation never stops at the first problem.
    """

    exit_code = 2

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{c}: {m}" for c, m in self.violations)
        super().__init__(msg)

    @property
    def code(self):
        if len(self.violations) == 1:
            return self.violations[0][0]
        return "ConfigError"

    def codes(self):
        return [c for c, _ in self.violations]


class UnknownScenario(WavetrajError, KeyError):
    exit_code = 2

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvalidOverride(WavetrajError, ValueError):
    exit_code = 2


class ConfigParse(WavetrajError, ValueError):
    exit_code = 2


class MalformedCsv(WavetrajError, ValueError):
    exit_code = 2


class IoFailure(WavetrajError, OSError):
    exit_code = 1


class NoBracket(WavetrajError, ValueError):
    """The potential never reaches the requested energy ahead of the launch point."""


class WindowTooSmall(WavetrajError, ValueError):
    pass


class AmplitudeUnderflow(WavetrajError, FloatingPointError):
    pass


class CausticCollapse(WavetrajError, ArithmeticError):
    """Adjacent rays crossed or their spacing collapsed."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class LongitudinalStall(WavetrajError, ArithmeticError):
    pass


class RelativisticPole(WavetrajError, ArithmeticError):
    """E - V(r) <= 0 somewhere along a relativistic ray."""


class NonFinite(WavetrajError, FloatingPointError):
    pass


class MaxStepsExceeded(WavetrajError, RuntimeError):
    pass


class EmptyOverlap(WavetrajError, ValueError):
    pass

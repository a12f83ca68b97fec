"""Exception hierarchy. Every error carries enough context to locate the failure."""


class LevyPimError(Exception):
    """Base class for all package errors."""


class ParameterError(LevyPimError, ValueError):
    """Invalid argument or configuration value."""


class ConfigError(ParameterError):
    """Config file cannot be parsed or validated; names the offending key."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where += f" (key: {key}"
            where += f", line {line})" if line is not None else ")"
        super().__init__(message + where)


class NumericalError(LevyPimError, ArithmeticError):
    """A numerical procedure failed to converge or is internally inconsistent."""

    def __init__(self, message, estimates=None):
        self.estimates = estimates
        if estimates is not None:
            message += f" [estimates: {estimates}]"
        super().__init__(message)


class PathOverflowError(NumericalError):
    """A simulated path became non-finite or exceeded the rejection threshold."""

    def __init__(self, message, step=None, micro_step=None):
        self.step = step
        self.micro_step = micro_step
        loc = []
        if step is not None:
            loc.append(f"macro step {step}")
        if micro_step is not None:
            loc.append(f"micro step {micro_step}")
        if loc:
            message += " at " + ", ".join(loc)
        super().__init__(message)


class EnsembleFailure(NumericalError):
    """All paths of an ensemble were rejected."""


class BudgetError(LevyPimError):
    """A schedule or run would exceed the configured work budget."""

    def __init__(self, message, level=None):
        self.level = level
        if level is not None:
            message += f" (level {level})"
        super().__init__(message)

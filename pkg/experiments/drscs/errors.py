class DrscsError(Exception):
    exit_code = 1


class ArgumentError(DrscsError, ValueError):
    pass


class ConfigError(DrscsError, ValueError):
    pass


class CapacityError(DrscsError, ValueError):
    pass


class DataError(DrscsError, ValueError):
    exit_code = 2

    def __init__(self, message, row=None):
        if row is not None:
            message = f"{message} (row {row})"
        super(DataError, self).__init__(message)
        self.row = row


class NumericError(DrscsError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, iteration=None, **diagnostics):
        if iteration is not None:
            message = f"{message} at iteration {iteration}"
        if diagnostics:
            message += " (" + ", ".join(f"{k}={v}" for k, v in diagnostics.items()) + ")"
        super(NumericError, self).__init__(message)
        self.iteration = iteration
        self.diagnostics = diagnostics


class ConvergenceError(DrscsError, RuntimeError):
    """Raised when the prox subsolver runs out of budget; ``best`` is the best iterate found."""
    exit_code = 3

    def __init__(self, message, best=None, gap=None):
        super(ConvergenceError, self).__init__(message)
        self.best = best
        self.gap = gap

"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GKdVError(Exception):
    exit_code = 1


class ConfigError(GKdVError, ValueError):
    """Invalid configuration, grid, or parameter constraint."""

    exit_code = 1

    def __init__(self, message, line=None):
        self.line = line
        self.message = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConstraintError(ConfigError):
    pass


class GenerationError(ConfigError):
    pass


class BlowupError(GKdVError, FloatingPointError):
    exit_code = 2

    def __init__(self, message, time=None, last_good_slice=None):
        self.time = time
        self.last_good_slice = last_good_slice
        super().__init__(message)


class PrecisionError(GKdVError):
    exit_code = 3


class ContaminationError(GKdVError):
    exit_code = 4


class NonContractionError(GKdVError):
    exit_code = 5

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)

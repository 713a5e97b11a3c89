"""Exception hierarchy shared across the package."""


class QKGEError(Exception):
    """Base class for all package errors."""


class SizeError(QKGEError, ValueError):
    pass


class CircuitError(QKGEError, ValueError):
    pass


class ParameterError(QKGEError, KeyError):
    pass


class DataError(QKGEError):
    """Problems with input files or vocabulary lookups."""


class ParseError(DataError, ValueError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class UnknownNameError(DataError, KeyError):
    def __init__(self, kind, name, suggestions=()):
        self.kind = kind
        self.name = name
        self.suggestions = list(suggestions)
        msg = f"unknown {kind} {name!r}"
        if self.suggestions:
            msg += f"; nearest: {', '.join(self.suggestions)}"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class SamplingError(QKGEError, ValueError):
    pass


class CheckpointFormatError(DataError, ValueError):
    pass


class ConfigError(QKGEError, ValueError):
    pass


class TrainingError(QKGEError, ArithmeticError):
    pass

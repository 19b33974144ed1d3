"""Exception hierarchy shared by all modules.

The CLI maps ``ValidationError`` to exit code 2 and ``NumericalError`` to 3.
"""


class ValidationError(ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class IntegrityError(ValidationError):
    def __init__(self, message, offenders=()):
        self.offenders = sorted(offenders)
        if self.offenders:
            message = f"{message}: {', '.join(self.offenders)}"
        super().__init__(message)


class VocabularyError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class ProvenanceError(ValidationError):
    pass


class NumericalError(RuntimeError):
    pass

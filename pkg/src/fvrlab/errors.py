class FvrlabError(Exception):
    """
    Base class of every error raised by fvrlab.
    """


class InvalidInputError(FvrlabError, ValueError):
    pass


class InvalidModelError(InvalidInputError):
    pass


class InvalidSelectionError(InvalidInputError):
    pass


class InvalidDatasetError(InvalidInputError):
    pass


class InvalidArgumentError(InvalidInputError):
    pass


class InvalidDesignError(InvalidInputError):
    pass


class ConfigError(InvalidInputError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(FvrlabError, ArithmeticError):
    """
    A numerical routine could not produce a result; `operation` names it.
    """

    def __init__(self, operation, message):
        self.operation = operation
        super().__init__(message)


class SingularMatrixError(NumericalError):
    pass


class DegenerateProjectionError(NumericalError):
    pass


class DegenerateGraphError(NumericalError):
    pass


class EnumerationCapError(DegenerateProjectionError):
    pass


class InsufficientHoldoutError(NumericalError):
    pass


class FactorizationError(NumericalError):
    pass

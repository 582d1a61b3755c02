"""Exception hierarchy; each class maps to a pipeline stage for the CLI."""


class BnsensError(Exception):
    stage = "runtime"


class DataFormatError(BnsensError, ValueError):
    stage = "parse"


class PreprocessError(BnsensError, ValueError):
    stage = "preprocess"

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class CapacityError(BnsensError):
    stage = "capacity"


class DomainError(BnsensError, ValueError):
    """Argument outside the domain of a numerical routine."""

    stage = "domain"

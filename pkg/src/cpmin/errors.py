"""Exception hierarchy shared by the pipeline stages."""


class CpminError(Exception):
    """Base class for all errors raised by cpmin."""


class RepositoryAccessError(CpminError):
    """The repository path is missing or not readable by git."""


class CommitIdentifierError(CpminError):
    """A commit identifier does not resolve in the repository."""


class ExtractionError(CpminError):
    """Method boundaries could not be recovered from a source file."""

    def __init__(self, message: str, file: str = "<source>", line: int = 0):
        super().__init__(f"{file}:{line}: {message}")
        self.file = file
        self.line = line


class NormalizationError(CpminError, ValueError):
    """A signature could not be parsed into container, name and parameters."""

    def __init__(self, text: str, reason: str = "unparsable signature"):
        super().__init__(f"{reason}: {text!r}")
        self.text = text


class CallGraphParseError(CpminError, ValueError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DomainError(CpminError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class LedgerFormatError(CpminError, ValueError):
    pass


class EvaluationInputError(CpminError, ValueError):
    pass

from typing import Optional

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class ApplicationException(Exception):
    """Custom exception class for application errors."""

    def __init__(self, status_code: int, message: str):
        """
        Initialize the ApplicationException.

        Args:
        - status_code (int): The process exit code associated with the
            exception (2 for usage/configuration, 1 for runtime failures).
        - message (str): The error message.
        """
        super().__init__(message)
        self.status_code = status_code
        self.message = message

    def __str__(self):
        """Return a string representation of the exception."""
        return (
            f"{type(self).__name__}(status_code={self.status_code}, "
            + f"message='{self.message}')"
        )


class ConfigurationError(ApplicationException):
    def __init__(self, message: str):
        super().__init__(USAGE_ERROR, message)


class InputTooLongError(ApplicationException):
    def __init__(self, length: int, limit: int):
        super().__init__(RUNTIME_ERROR, f"input length {length} exceeds max_positions {limit}")
        self.length = length
        self.limit = limit


class VocabularyError(ApplicationException):
    def __init__(self, message: str):
        super().__init__(RUNTIME_ERROR, message)


class OptionError(ApplicationException):
    def __init__(self, option, n_options: int):
        super().__init__(
            RUNTIME_ERROR, f"invalid context option {option}, expected 0..{n_options - 1}"
        )
        self.option = option


class DecodeError(ApplicationException):
    def __init__(self, message: str):
        super().__init__(RUNTIME_ERROR, message)


class NumericError(ApplicationException):
    def __init__(self, message: str, component: Optional[str] = None):
        super().__init__(RUNTIME_ERROR, message)
        self.component = component


class EmptyInputError(ApplicationException):
    def __init__(self, message: str):
        super().__init__(RUNTIME_ERROR, message)


class ParseError(ApplicationException):
    def __init__(self, message: str, line_number: int):
        super().__init__(RUNTIME_ERROR, f"line {line_number}: {message}")
        self.line_number = line_number


class CheckpointError(ApplicationException):
    def __init__(self, message: str):
        super().__init__(RUNTIME_ERROR, message)

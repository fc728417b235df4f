"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage problems (InvalidArgument) exit 2,
data problems (InvalidInput, ParseError) exit 3, anything else exit 4.
"""


class TfcwError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(TfcwError, ValueError):
    """A parameter is outside its documented range or inconsistent with others."""


class InvalidInput(TfcwError, ValueError):
    """Input data violates a structural requirement (shape, finiteness, labels)."""


class ParseError(TfcwError, ValueError):
    """A file could not be parsed; carries the path and the offending line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")

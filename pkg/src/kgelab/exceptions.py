"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError is a usage problem (exit 2),
everything else raised from a running command is a runtime failure (exit 1).
"""


class KgelabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KgelabError):
    """Invalid configuration value, flag combination, or precondition."""


class ParseError(KgelabError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, path=None, line_no=None):
        self.path = path
        self.line_no = line_no
        prefix = ""
        if path is not None:
            prefix += f"{path}:"
        if line_no is not None:
            prefix += f"{line_no}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class EmptyInputError(KgelabError):
    """An input that must yield at least one record yielded none."""


class UnknownEntityError(KgelabError):
    """A label or id does not resolve against the relevant vocabulary."""


class ConsistencyError(KgelabError):
    """Two artifacts that must agree (model vs graph vs hints) do not."""


class CheckpointError(KgelabError):
    """Checkpoint file is unreadable, truncated, or of a foreign format."""

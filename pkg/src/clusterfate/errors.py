"""Exception hierarchy. The CLI maps these onto exit codes."""


class ClusterFateError(Exception):
    """Base class for all library errors."""


class ConfigError(ClusterFateError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class DataError(ClusterFateError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    pass


class StratificationError(ConfigError):
    def __init__(self, label, count, k):
        self.label = label
        super().__init__(f"class {label!r} has {count} instances, fewer than k={k} folds")

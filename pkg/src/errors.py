class ToolkitError(ValueError):
    pass


class InputError(ToolkitError):
    pass


class DomainError(ToolkitError):
    pass


class ConfigError(ToolkitError):
    pass


class DegenerateRegionError(ToolkitError):
    pass


class ParameterError(ToolkitError):
    pass


class ValidationError(ToolkitError):
    pass


class ConfigParseError(ToolkitError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column

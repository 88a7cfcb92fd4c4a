# utils/errors.py - Exception hierarchy shared by the engine and the CLI


class XolapError(Exception):
    """Base class for every error raised by the engine."""


class XmlParseError(XolapError, ValueError):
    """Malformed XML input."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None and column is not None:
            message = f'line {line}, column {column}: {message}'
        elif line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class UnsupportedConstructError(XmlParseError):
    """Well-formed XML using a construct outside the supported subset."""

    def __init__(self, construct, line=None, column=None):
        self.construct = construct
        super().__init__(f'unsupported construct: {construct}', line, column)


class TreeStructureError(XolapError, ValueError):
    pass


class UnknownNodeError(XolapError, LookupError):
    pass


class PatternParseError(XolapError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f'{field}: {message}')


class PatternValidationError(XolapError, ValueError):
    def __init__(self, report):
        self.report = list(report)
        super().__init__('; '.join(v.message for v in self.report))


class WitnessConsistencyError(XolapError, ValueError):
    pass


class OracleLimitError(XolapError, RuntimeError):
    """The brute-force oracle refuses inputs above its size limits."""


class SchemaConfigError(XolapError, ValueError):
    pass


class SchemaBindingError(XolapError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f'{path}: {message}')


class UnknownDimensionError(XolapError, LookupError):
    pass


class RollupQueryError(XolapError, ValueError):
    pass


class RollupDataError(XolapError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f'{path}: {message}')


class NumericDomainError(XolapError, ArithmeticError):
    pass


class EmptyAggregateError(XolapError, ArithmeticError):
    pass

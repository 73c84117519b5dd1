"""Exception hierarchy.

Three families map onto CLI exit codes: data problems (3), numerical
failures during fitting (4) and broken internal invariants (5).
"""


class HinRiskError(Exception):
    """Base class for every error raised by the package."""


class DataError(HinRiskError):
    """Input data does not conform to the schema or file formats."""


class NumericalError(HinRiskError):
    """A model could not be fitted."""


class InvariantViolation(HinRiskError):
    """An internal consistency check failed."""


def _located(msg, source=None, line=None, column=None):
    where = []
    if source is not None:
        where.append(str(source))
    if line is not None:
        where.append(f"line {line}")
    if column is not None:
        where.append(f"column {column!r}")
    return f"{msg} ({', '.join(where)})" if where else msg


class LocatedDataError(DataError):
    def __init__(self, msg, source=None, line=None, column=None):
        self.source = source
        self.line = line
        self.column = column
        super().__init__(_located(msg, source, line, column))


class UnknownType(LocatedDataError):
    pass


class DanglingEdge(LocatedDataError):
    pass


class DuplicateId(LocatedDataError):
    pass


class TypeMismatch(LocatedDataError):
    pass


class SelfLoop(LocatedDataError):
    pass


class ParseError(LocatedDataError):
    pass


class UnknownNode(DataError):
    pass


class InvalidWindow(DataError):
    pass


class SchemaError(DataError):
    pass


class MetaPathSyntaxError(DataError):
    def __init__(self, msg, position):
        self.position = position
        super().__init__(f"{msg} at position {position}")


class IncompatibleEndpoint(DataError):
    def __init__(self, index, msg=""):
        self.index = index
        super().__init__(f"incompatible endpoint at relation {index}" + (f": {msg}" if msg else ""))


class SingleClassError(DataError):
    pass


class NoLabeledNodes(DataError):
    pass


class UnknownAttribute(DataError):
    pass


class MissingModel(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class EmptyWindow(DataError):
    pass


class InfeasibleConfig(DataError):
    pass


class OracleLimitExceeded(HinRiskError):
    pass


class SeparationDetected(NumericalError):
    pass


class SingularInformation(NumericalError):
    pass

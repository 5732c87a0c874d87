"""Exception hierarchy shared by all modules."""


class DerhamTraceError(Exception):
    """Base class for library errors."""


class NonManifold(DerhamTraceError):
    pass


class DegenerateCell(DerhamTraceError):
    pass


class DanglingVertex(DerhamTraceError):
    pass


class NotBoundarySimplex(DerhamTraceError):
    pass


class NotContractible(DerhamTraceError):
    pass


class LevelMismatch(DerhamTraceError):
    pass


class UnsupportedPair(DerhamTraceError):
    pass


class SingularSystem(DerhamTraceError):
    pass


class NotInRange(DerhamTraceError):
    pass


class ParseError(DerhamTraceError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleTrace(DerhamTraceError):
    pass


class Infeasible(DerhamTraceError):
    pass


class QuadratureDomainMismatch(DerhamTraceError):
    pass

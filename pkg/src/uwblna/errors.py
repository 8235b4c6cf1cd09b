"""Exception hierarchy shared by every engine."""


class UwbLnaError(Exception):
    """Base class for all library errors."""


class DomainError(UwbLnaError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CircuitError(UwbLnaError, ValueError):
    """A circuit violates a structural or value invariant.

    ``labels`` and ``nodes`` name the offending elements so the netlist
    parser can point at source lines.
    """

    def __init__(self, message, labels=(), nodes=()):
        super().__init__(message)
        self.labels = tuple(labels)
        self.nodes = tuple(nodes)


class NetlistError(UwbLnaError):
    """Netlist text could not be turned into a circuit.

    ``line`` and ``column`` are 1-based; either may be ``None`` when the
    problem is not tied to one location (e.g. a floating node).
    """

    kind = "error"

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(self._format())

    def _format(self):
        where = ""
        if self.line is not None:
            where = f"line {self.line}"
            if self.column is not None:
                where += f", column {self.column}"
            where += ": "
        return f"{self.kind}: {where}{self.message}"


class NetlistSyntaxError(NetlistError):
    kind = "syntax error"


class NetlistSemanticError(NetlistError):
    kind = "semantic error"


class NumericError(UwbLnaError):
    """A numerical procedure failed."""


class SingularMatrixError(NumericError):
    """The MNA system is singular at the requested frequency."""


class StructureError(NumericError):
    """The circuit topology makes the MNA system structurally singular."""


class InterpolationError(NumericError):
    """Rational reconstruction could not find a usable sample set."""


class PortError(UwbLnaError, ValueError):
    """Port definitions do not fit the requested analysis."""


class InfeasibleError(UwbLnaError, ValueError):
    """No solution exists inside the requested bounds."""


class ParameterError(UwbLnaError, ValueError):
    """A topology or design is missing a parameter or has an unusable one."""


class ConvergenceError(NumericError):
    """An optimizer stopped without meeting its target."""

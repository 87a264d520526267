"""Exception hierarchy shared by all modules."""


class PowerGapError(Exception):
    pass


class InvalidArgument(PowerGapError, ValueError):
    pass


class InvalidMesh(PowerGapError, ValueError):
    pass


class InvalidCoefficient(PowerGapError, ValueError):
    pass


class IncompatibleData(PowerGapError, ValueError):
    pass


class InvalidRegime(PowerGapError, ValueError):
    pass


class InvalidInput(PowerGapError, ValueError):
    pass


class DegenerateInput(PowerGapError, ValueError):
    pass


class DegenerateSweep(PowerGapError, ValueError):
    pass


class SolverFailure(PowerGapError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericFailure(PowerGapError, RuntimeError):
    pass


class GateFailure(PowerGapError, RuntimeError):
    """A hard identity or bound gate failed for one experiment case."""

    def __init__(self, case_id, message):
        super().__init__(f"case {case_id}: {message}")
        self.case_id = case_id

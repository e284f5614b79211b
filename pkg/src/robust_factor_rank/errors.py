"""Exception hierarchy.

Everything raised deliberately by the package derives from
:class:`FactorRankError`, so callers (and the CLI) can catch one type.
"""


class FactorRankError(Exception):
    """Base class for all package errors."""


class InvalidMatrix(FactorRankError, ValueError):
    pass


class DimError(FactorRankError, ValueError):
    pass


class SingularCovariance(FactorRankError, ValueError):
    def __init__(self, msg="covariance is singular"):
        super().__init__(
            f"{msg}; N must exceed n for an invertible sample covariance")


class ParseError(FactorRankError, ValueError):
    def __init__(self, msg, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {col})" if col is not None else ")")
        super().__init__(msg + where)


class EmptyInput(FactorRankError, ValueError):
    pass


class InvalidAlpha(FactorRankError, ValueError):
    pass


class SingularDraw(FactorRankError, RuntimeError):
    pass


class AsymptoticRegimeError(FactorRankError, RuntimeError):
    pass


class DomainError(FactorRankError, ValueError):
    """(lambda, X) outside the domain of the dual objective."""


class TrivialSolutionRisk(FactorRankError, ValueError):
    def __init__(self, delta, delta_max):
        self.delta = delta
        self.delta_max = delta_max
        super().__init__(
            f"delta={delta:.6g} is not below delta_max={delta_max:.6g}: a purely "
            "diagonal covariance lies inside the KL ball and the trivial solution "
            "L = 0 cannot be ruled out")


class StepFailure(FactorRankError, RuntimeError):
    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"Armijo backtracking failed at iteration {iteration}")


class InfeasibleDual(FactorRankError, ValueError):
    pass


class ZeroRank(FactorRankError, ValueError):
    pass


class RecoveryInconsistent(FactorRankError, RuntimeError):
    pass


class NegativeQ(FactorRankError, RuntimeError):
    pass


class ZeroMatrixRank(FactorRankError, ValueError):
    pass


class DegenerateSubspace(FactorRankError, ValueError):
    pass


class InvalidRank(FactorRankError, ValueError):
    pass


class StudyFailure(FactorRankError, RuntimeError):
    pass

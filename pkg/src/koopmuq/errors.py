"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for bad usage or input,
3 for a violated mathematical precondition, 4 for a numerical failure.
"""


class KoopmuqError(Exception):
    exit_code = 2


class InvalidParameter(KoopmuqError, ValueError):
    pass


class ShapeError(KoopmuqError, ValueError):
    pass


class IoError(KoopmuqError, OSError):
    pass


class ParseError(KoopmuqError, ValueError):
    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"non-numeric cell at row {row}, column {col}")


class InsufficientData(KoopmuqError, ValueError):
    pass


class EmptyWindow(KoopmuqError, ValueError):
    pass


class DegenerateVariance(KoopmuqError, ValueError):
    exit_code = 3


class DegreesOfFreedomError(KoopmuqError, ValueError):
    exit_code = 3


class InvalidMatrix(KoopmuqError, ValueError):
    exit_code = 4


class RankDeficient(KoopmuqError, ArithmeticError):
    exit_code = 4


class NotSymmetric(KoopmuqError, ValueError):
    exit_code = 4


class DivergenceError(KoopmuqError, ArithmeticError):
    exit_code = 4

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"state became non-finite at t = {time:g} s")

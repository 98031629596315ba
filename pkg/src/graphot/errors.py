"""Exception hierarchy.

Three branches matter to callers: input errors (bad graphs, measures,
couplings, datasets), convergence errors (iterative solvers giving up),
and rule mismatches in stochastic checks. The CLI maps input errors to
exit code 2 and convergence errors to exit code 3.
"""


class GraphOTError(Exception):
    """Base class for all errors raised by this package."""


class GraphInputError(GraphOTError, ValueError):
    """Invalid input data or a violated precondition."""


class ConvergenceError(GraphOTError, RuntimeError):
    """An iterative method failed to reach its tolerance."""


# graph construction
class SelfLoop(GraphInputError):
    pass


class DuplicateEdge(GraphInputError):
    pass


class NonpositiveWeight(GraphInputError):
    pass


class Disconnected(GraphInputError):
    pass


class DimensionMismatch(GraphInputError):
    pass


# measures
class InvalidMeasure(GraphInputError):
    pass


class NotMeanZero(GraphInputError):
    pass


# flows and couplings
class InvalidCoupling(GraphInputError):
    pass


class PathNotConnectingPair(GraphInputError):
    pass


class NotAPath(GraphInputError):
    pass


class NotATree(GraphInputError):
    pass


# solvers
class NoConvergence(ConvergenceError):
    """Iteration cap reached before the duality gap closed.

    Carries the best iterate so callers can inspect it: attributes
    ``best`` (the partial solution) and ``gap`` (its duality gap).
    """

    def __init__(self, message, best=None, gap=None):
        super().__init__(message)
        self.best = best
        self.gap = gap


class ConvergenceFailure(ConvergenceError):
    pass


class SingularSystem(ConvergenceError):
    pass


# random walks
class HorizonExceeded(ConvergenceError):
    pass


class RuleMismatch(GraphInputError):
    pass


# analysis
class InvalidCurve(GraphInputError):
    pass


class HypothesisFailure(GraphInputError):
    pass


# clustering / datasets
class ZeroMassRow(GraphInputError):
    pass


class RaggedRow(GraphInputError):
    pass


class NegativePixel(GraphInputError):
    pass


class DisconnectedKnn(GraphInputError):
    def __init__(self, message, n_components=None):
        super().__init__(message)
        self.n_components = n_components


class LengthMismatch(GraphInputError):
    pass


class ShapeMismatch(GraphInputError):
    pass


class DegenerateRegressor(GraphInputError):
    pass

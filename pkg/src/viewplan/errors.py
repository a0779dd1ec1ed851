"""Exception types raised across the planner stack."""


class ViewPlanError(Exception):
    pass


class BoundsError(ViewPlanError, IndexError):
    pass


class HorizonError(ViewPlanError, ValueError):
    pass


class ScenarioError(ViewPlanError, ValueError):
    pass


class ShapeError(ViewPlanError, ValueError):
    pass


class DegenerateGeometryError(ViewPlanError, ValueError):
    pass


class DoubleCommitError(ViewPlanError, KeyError):
    pass


class InfeasibleError(ViewPlanError):
    """No trajectory reaches the horizon under the given constraints."""


class SequentialFailure(InfeasibleError):
    def __init__(self, robot, message=None):
        self.robot = robot
        super().__init__(message or f"robot {robot} has no feasible path under priority constraints")


class NoSolutionError(ViewPlanError):
    """Constraint tree exhausted (or node budget hit) without a conflict-free plan."""

    def __init__(self, message, best_node=None, nodes_generated=0, nodes_expanded=0):
        super().__init__(message)
        self.best_node = best_node
        self.nodes_generated = nodes_generated
        self.nodes_expanded = nodes_expanded

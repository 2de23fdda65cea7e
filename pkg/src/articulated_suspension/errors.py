class SuspensionError(Exception):
    """Base class for all package errors."""


class ContractViolation(SuspensionError, ValueError):
    """An argument broke a documented precondition."""


class UnknownFrame(SuspensionError, KeyError):
    pass


class TriangleDegenerate(SuspensionError):
    """Actuator length leaves the open interval allowed by the triangle inequality."""

    def __init__(self, length, lower, upper):
        self.length = length
        self.bound = lower if length <= lower else upper
        super().__init__(
            f"L_x={length:.6g} outside ({lower:.6g}, {upper:.6g}); violated bound {self.bound:.6g}"
        )


class ChamberDegenerate(SuspensionError):
    """Piston too close to a cylinder end cap for the pressure model."""


class NonPositiveAngle(SuspensionError):
    """CoM ground projection on or outside a support polygon edge."""

    def __init__(self, edge, angle):
        self.edge = edge
        self.angle = angle
        super().__init__(f"stability angle of edge {edge!r} is {angle:.6g} rad")


class CenterOfMassOutsideWheelbase(SuspensionError):
    pass


class Infeasible(SuspensionError):
    def __init__(self, constraint, violation):
        self.constraint = constraint
        self.violation = violation
        super().__init__(f"constraint {constraint} violated by {violation:.3g}")


class MaxIterations(SuspensionError):
    """Raised by a strict solve that ran out of iterations; carries the best iterate."""

    def __init__(self, solution):
        self.solution = solution
        super().__init__(f"no convergence in {solution.iterations} iterations (kkt {solution.kkt:.3g})")


class SimulationError(SuspensionError):
    """A module error inside the simulation loop, tagged with stage and time."""

    def __init__(self, stage, t, cause):
        self.stage = stage
        self.t = t
        self.cause = cause
        super().__init__(f"{stage} failed at t={t:.6g} s: {cause}")

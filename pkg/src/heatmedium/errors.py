"""Exception hierarchy shared by the solver modules."""


class NumericalError(RuntimeError):
    """A solve failed for numerical reasons."""


class NearSingularError(NumericalError):
    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class DivergenceError(NumericalError):
    pass


class RegimeError(ValueError):
    """A scale-separation requirement (a << d << b) is violated."""


class PackingInfeasibleError(RuntimeError):
    pass


class SingularityError(ValueError):
    """A kernel was evaluated at coinciding points."""


class GeometryError(ValueError):
    pass

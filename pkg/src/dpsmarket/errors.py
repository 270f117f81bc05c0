"""Exception hierarchy shared by the solvers."""


class DPSMarketError(Exception):
    """Base class for every error raised by this package."""


class UnstableLoad(DPSMarketError, ValueError):
    """Offered load reaches or exceeds the service rate."""


class DegenerateDenominator(DPSMarketError, ArithmeticError):
    """An inner denominator of the DPS delay formulas is not positive."""


class DomainError(DPSMarketError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class InvalidConfig(DPSMarketError, ValueError):
    pass


class DegenerateSplit(DPSMarketError, ArithmeticError):
    """Interior equilibrium formulas hit 0/0 and no tie rule applies."""


class NoConvergence(DPSMarketError, RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class OptimizerFailure(DPSMarketError, RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class NoEquilibriumFound(DPSMarketError, RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []

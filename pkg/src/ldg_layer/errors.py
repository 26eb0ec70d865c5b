"""
Exception and warning types shared across ldg_layer.

Invalid user input is reported with ValueError ("[ERROR] ..." messages),
oversized systems with its subclass MemoryBudgetError. The other classes
cover numerical failures and modelling caveats.
"""


class NumericalFailure(RuntimeError):
    """A solve, factorization or local projection could not be completed."""


class SingularSystemError(NumericalFailure):
    """Pivot below threshold during sparse LU factorization."""


class MemoryBudgetError(ValueError):
    """A monolithic system is too large to factorize within the configured budget."""


class SingularPerturbationWarning(UserWarning):
    """Mesh parameters fall outside the singularly perturbed regime."""


class ParameterOverrideWarning(UserWarning):
    """A parameter was overridden away from the value the theory assumes."""


class CoercivityWarning(UserWarning):
    """Sampled b - div(a)/2 falls below the declared lower bound beta."""

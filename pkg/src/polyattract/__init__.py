"""Polynomial attraction rates for damped semilinear wave equations.

Modules:

- ``rates``: the abstract decay engine (inverse map iteration and closed-form bounds)
- ``solver``: sine-Galerkin Strang splitting solver and energy bookkeeping
- ``contraction``: pair diagnostics, velocity-integral and contraction checks
- ``harness``: cloud experiments, attraction distances and rate fits
- ``cli``: configuration and experiment runner
"""

from .errors import DomainError, NumericalError

__version__ = "0.1.0"
__all__ = ["DomainError", "NumericalError", "__version__"]

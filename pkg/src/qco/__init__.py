"""Revenue management for a single-server queue shared by logit customers."""

from .core import Instance, InstanceError, Product, load_instance, save_instance
from .equilibrium import Equilibrium, equilibrium, solve_lambda_hetero, solve_lambda_homog
from .pricing import optimal_pricing

__version__ = "0.1.0"

__all__ = [
    "Instance", "InstanceError", "Product", "load_instance", "save_instance",
    "Equilibrium", "equilibrium", "solve_lambda_homog", "solve_lambda_hetero",
    "optimal_pricing",
]

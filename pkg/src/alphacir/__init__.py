"""Simulation and closed-form verification of alpha-stable CIR models,
their measure-valued extensions on finite type spaces and the associated
generalized Fleming-Viot processes."""

__version__ = "0.1.0"

from .model import CirParams, ExpFunctional, ModelParams  # noqa: E402
from .rng import RngStream  # noqa: E402

__all__ = ["CirParams", "ExpFunctional", "ModelParams", "RngStream", "__version__"]

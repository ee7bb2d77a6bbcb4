"""Equilibrium approximators for normal-form games with permutation symmetry."""

from .game import (
    CapacityError,
    DimensionError,
    Game,
    GamePermutation,
    GameShape,
    JointStrategy,
    PlayerPermutation,
    ProductStrategy,
    permute_game,
    permute_joint,
    permute_product,
)
from .metrics import SolutionConcept, approximation, exploitabilities, nashconv, social_welfare
from .approximator import ApproximatorModel, EquivarianceMode, HeadKind, forward

__version__ = "0.1.0"

__all__ = [
    "ApproximatorModel",
    "CapacityError",
    "DimensionError",
    "EquivarianceMode",
    "Game",
    "GamePermutation",
    "GameShape",
    "HeadKind",
    "JointStrategy",
    "PlayerPermutation",
    "ProductStrategy",
    "SolutionConcept",
    "approximation",
    "exploitabilities",
    "forward",
    "nashconv",
    "permute_game",
    "permute_joint",
    "permute_product",
    "social_welfare",
]

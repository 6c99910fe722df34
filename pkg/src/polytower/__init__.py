"""Polynomial towers over prime fields: bias, rank and regular decompositions."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .field import PrimeField, SpaceShape, make_rng
from .poly import Poly, random_poly
from .multiaffine import MultiAffineMap, MultiLinearMap
from .tower import Layer, Tower, check_regularity
from .analytic import bias, level_histogram, monte_carlo_bias
from .rank import (collection_rank, nullstellensatz_solve, partition_rank, relative_partition_rank,
                   relative_rank, schmidt_rank, verify_certificate)
from .regularize import (RegularizationConfig, budget_schedule, polynomial_regularize,
                         regular_decomposition, verify_decomposition)

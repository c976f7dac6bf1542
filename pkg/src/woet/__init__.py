"""Weak optimal entropy transport on finite grounds."""

from .cost import LinearCost, MartingaleCost, MartonCost, convex_envelope_1d, make_cost
from .entropy import KL, ChiSquared, Indicator1, Range, make_entropy
from .errors import InfeasibleProblem, WoetError
from .measures import Coupling, DiscreteMeasure, GroundSet
from .solver import ProblemSpec, SolverOptions, SolveReport, Status, objective, solve

__version__ = "0.1.0"

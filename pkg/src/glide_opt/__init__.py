"""Subgradient gliding and projected subgradient methods for nonsmooth convex problems."""

from .errors import GlideOptError
from .oracles import NoiseModel, oracle_from_dict, sanity_instance
from .schedules import (
    AdaptiveG,
    AlphaBetaW,
    AlphaW,
    BetaW,
    Constant,
    ConstantHorizon,
    ConstantW,
    DecayingRL,
    InverseAlphaK,
    Normalized,
    One,
    PowerK,
    SearchedSet,
    StronglyConvexJoint,
    StronglyConvexLinear,
)
from .sets import Ball, Box, Ellipse2D
from .solver import RunRecord, SolverConfig, run, run_batch

__version__ = "0.1.0"

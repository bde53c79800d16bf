"""Pathwise simulation of affine processes through multivariate random time changes."""

__version__ = "0.1.0"

from .config import load_params
from .jumps import (
    DiracAt,
    ExponentialOnCoordinate,
    FiniteMixture,
    IndependentProduct,
    JumpMeasure,
)
from .params import AdmissibleParams, LevyTriplet, StateDim, classify_heston, validate
from .riccati import cf_affine, eval_F, eval_R, solve_riccati
from .simulate import SimulationConfig, Simulator, simulate

__all__ = [
    "AdmissibleParams",
    "DiracAt",
    "ExponentialOnCoordinate",
    "FiniteMixture",
    "IndependentProduct",
    "JumpMeasure",
    "LevyTriplet",
    "SimulationConfig",
    "Simulator",
    "StateDim",
    "cf_affine",
    "classify_heston",
    "eval_F",
    "eval_R",
    "load_params",
    "simulate",
    "solve_riccati",
    "validate",
]

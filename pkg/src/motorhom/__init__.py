"""Effective Hamiltonians and transport of two-state molecular motor models."""

from __future__ import annotations

from .cell import CellSolution, dhbar, solve_cell
from .effective import EffectiveHamiltonian, legendre, sweep, velocity
from .errors import MotorhomError, SolverError, ValidationError
from .fokker_planck import Diagnostics, Domain, SimState, diagnostics, init_state, run, simulate, step
from .kernels import BACKEND
from .model import PRESETS, MotorModel, build_model, load_model

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CellSolution", "Diagnostics", "Domain", "EffectiveHamiltonian", "MotorModel",
    "MotorhomError", "PRESETS", "SimState", "SolverError", "ValidationError", "build_model",
    "dhbar", "diagnostics", "init_state", "legendre", "load_model", "run", "simulate",
    "solve_cell", "step", "sweep", "velocity",
]

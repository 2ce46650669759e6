"""Generalized hydrodynamics with relaxation: entropy structure, 1D solvers and the
Navier-Stokes-Fourier limit."""
from .thermo import DomainError, ModelParams
from .solver_ghe import Field, Grid1D, ImexConfig, SolverAbort

__all__ = ["DomainError", "ModelParams", "Field", "Grid1D", "ImexConfig", "SolverAbort"]
__version__ = "0.1.0"

"""Finite element Navier-Stokes solver with coarse-mesh nudging."""

from .mesh import build_coarse_grid, build_fine_mesh, locate_cell
from .fem import build_dofmap, quadrature_rule
from .observe import InterpolantKind, apply_interpolant, measure_constants
from .timeloop import SimulationConfig, Simulation, run
from .harness import (fit_slope, predict_gamma, run_convergence,
                      run_decay_study, run_lagrange_study)

__all__ = [
    "build_fine_mesh", "build_coarse_grid", "locate_cell",
    "build_dofmap", "quadrature_rule",
    "InterpolantKind", "apply_interpolant", "measure_constants",
    "SimulationConfig", "Simulation", "run",
    "fit_slope", "predict_gamma", "run_convergence", "run_decay_study",
    "run_lagrange_study",
]

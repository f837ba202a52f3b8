"""Numerical laboratory for the half-harmonic map heat flow into spheres.

Submodules: ``grid`` (periodic grids, fields, time meshes), ``spectral``
(Fourier multipliers and the Poisson semigroup), ``fracgrad`` (fractional
gradient densities), ``norms`` (Carleson-type and related seminorms),
``solver`` (Duhamel operator, Picard and marching solvers), ``experiments``
(initial data, oracles, self-similarity studies) and ``cli``.
"""
from .errors import (ConfigurationError, DataError, DomainError, HalfflowError, InterfaceError,
                     NonconvergenceError, ShapeError)
from .grid import Field, Grid, SpaceTimeField, TimeMesh, make_grid, sample_function
from .fracgrad import Annulus, FULL, fg_modulus_sq, od_inner
from .spectral import dirichlet_form, frac_laplacian, poisson_semigroup
from .solver import SolutionBundle, SolverConfig, picard_solve, step_solve
from .experiments import DataSpec, make_data

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DataError", "DomainError", "HalfflowError", "InterfaceError", "NonconvergenceError",
    "ShapeError", "Field", "Grid", "SpaceTimeField", "TimeMesh", "make_grid", "sample_function", "Annulus",
    "FULL", "fg_modulus_sq", "od_inner", "dirichlet_form", "frac_laplacian", "poisson_semigroup",
    "SolutionBundle", "SolverConfig", "picard_solve", "step_solve", "DataSpec", "make_data",
]

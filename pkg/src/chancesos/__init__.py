"""Polynomial outer/inner approximations of chance-constrained sets via
moment relaxations, with optional Stokes acceleration."""

from .measures import BoxDomain, MeasureSpec, integrate_out_omega, product_moment
from .oracle import GridSpec, l1_gap, mu_Kx, reference_rho, reference_volume, symdiff_measure
from .parsing import ParseError, parse_polynomial
from .pipeline import (ApproximationResult, ChanceProblem, HierarchyLevel,
                       IntervalUnion, MonotonicityError, PipelineError,
                       SolveFailedError, VolumeBound, compute_inner,
                       compute_outer, compute_volume_bound,
                       extract_intervals_1d, run_hierarchy)
from .polynomials import BasisIndexer, MultiIndex, Polynomial, basis_size, monomial_basis
from .problemfile import LoadedProblem, ProblemFileError, RunOptions, load_problem_file
from .program import (AssemblyOptions, ConicProblem, DegreeBudgetError, LinearForm,
                      PsdBlock, SemiAlgebraicSet, assemble_chance_relaxation,
                      assemble_volume_relaxation, localizing_matrix_block,
                      moment_matrix_block, stokes_chance_rows, stokes_volume_rows)
from .solver import (ConicSolution, ResidualReport, SolveStatus, SolverConfig,
                     check_solution, solve, write_sdpa)

__version__ = "0.1.0"

__all__ = [
    "ApproximationResult", "AssemblyOptions", "BasisIndexer", "BoxDomain",
    "ChanceProblem", "ConicProblem", "ConicSolution", "DegreeBudgetError",
    "GridSpec", "HierarchyLevel", "IntervalUnion", "LinearForm", "LoadedProblem",
    "MeasureSpec", "MonotonicityError", "MultiIndex", "ParseError", "PipelineError",
    "Polynomial", "ProblemFileError", "PsdBlock", "ResidualReport", "RunOptions",
    "SemiAlgebraicSet", "SolveFailedError", "SolveStatus", "SolverConfig",
    "VolumeBound", "assemble_chance_relaxation", "assemble_volume_relaxation",
    "basis_size", "check_solution", "compute_inner", "compute_outer",
    "compute_volume_bound", "extract_intervals_1d", "integrate_out_omega",
    "l1_gap", "load_problem_file", "localizing_matrix_block", "moment_matrix_block",
    "monomial_basis", "mu_Kx", "parse_polynomial", "product_moment",
    "reference_rho", "reference_volume", "run_hierarchy", "solve",
    "stokes_chance_rows", "stokes_volume_rows", "symdiff_measure", "write_sdpa",
]

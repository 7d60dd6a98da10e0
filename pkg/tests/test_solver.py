import math
import os

import numpy as np
import pytest

from chancesos import (AssemblyOptions, BoxDomain, MeasureSpec, SemiAlgebraicSet,
                       SolveStatus, SolverConfig, assemble_volume_relaxation,
                       check_solution, monomial_basis, parse_polynomial, solve,
                       write_sdpa)
from chancesos.program import (ConicProblem, GROUP_COMP, GROUP_MAIN, LinearForm,
                               ProblemMeta, PsdBlock, moment_matrix_block)


def _trivial_problem():
    """max y0  s.t.  y0 + z0 = 1, [y0] >= 0, [z0] >= 0; optimum 1, dual 1."""
    basis = [(0,)]
    meta = ProblemMeta(nvars=1, n=1, p=0, d=0, stokes=False, basis=basis,
                       moment_row_count=1)
    rows = [(LinearForm({(GROUP_MAIN, (0,)): 1.0, (GROUP_COMP, (0,)): 1.0}), 1.0)]
    blocks = [
        PsdBlock("y", 1, {(0, 0): (((GROUP_MAIN, (0,)), 1.0),)}),
        PsdBlock("z", 1, {(0, 0): (((GROUP_COMP, (0,)), 1.0),)}),
    ]
    return ConicProblem(LinearForm({(GROUP_MAIN, (0,)): 1.0}), rows, blocks, meta)


def _hankel_probe():
    """max y10 + y01 with unit diagonal and zero cross moment: optimum sqrt(2).

    Exercises the 3x3 svec layout; a transposed or unscaled vectorization
    lands entries in the wrong slots and misses the known optimum.
    """
    basis = monomial_basis(2, 2)
    meta = ProblemMeta(nvars=2, n=2, p=0, d=1, stokes=False, basis=basis,
                       moment_row_count=0)
    fix = {(0, 0): 1.0, (2, 0): 1.0, (0, 2): 1.0, (1, 1): 0.0}
    rows = [(LinearForm({(GROUP_MAIN, m): 1.0}), v) for m, v in fix.items()]
    blocks = [moment_matrix_block(GROUP_MAIN, 2, 1)]
    obj = LinearForm({(GROUP_MAIN, (1, 0)): 1.0, (GROUP_MAIN, (0, 1)): 1.0})
    return ConicProblem(obj, rows, blocks, meta)


@pytest.mark.parametrize("backend", ["clarabel", "scs"])
def test_trivial_problem_and_dual_sign(backend):
    cfg = SolverConfig(backend=backend, feas_tol=1e-8 if backend == "clarabel" else 1e-7,
                       gap_tol=1e-8 if backend == "clarabel" else 1e-7)
    sol = solve(_trivial_problem(), cfg)
    assert sol.status.usable()
    assert sol.objective == pytest.approx(1.0, abs=1e-6)
    # the single equality row's multiplier is the constant certificate p = 1
    assert sol.eq_duals[0] == pytest.approx(1.0, abs=1e-5)
    assert sol.dual_objective == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("backend", ["clarabel", "scs"])
def test_svec_layout_probe(backend):
    cfg = SolverConfig(backend=backend, feas_tol=1e-7, gap_tol=1e-7)
    sol = solve(_hankel_probe(), cfg)
    assert sol.status.usable()
    assert sol.objective == pytest.approx(math.sqrt(2.0), abs=1e-5)


def test_backends_agree_on_volume_instance(disk_volume):
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=2, stokes=False)
    a = solve(cp, SolverConfig(backend="clarabel"))
    b = solve(cp, SolverConfig(backend="scs", feas_tol=1e-7, gap_tol=1e-7))
    assert a.objective == pytest.approx(b.objective, abs=5e-5)


def test_optimal_status_implies_residuals_within_tolerance(disk_volume):
    K, lam = disk_volume(1.2)
    cp = assemble_volume_relaxation(K, lam, d=3, stokes=True)
    cfg = SolverConfig()
    sol = solve(cp, cfg)
    if sol.status is SolveStatus.OPTIMAL:
        assert sol.residuals.within(cfg)
    assert sol.residuals.max_eq_residual <= 1e-6
    assert sol.residuals.min_psd_eigenvalue >= -1e-6
    assert sol.residuals.relative_gap <= 1e-6


def test_check_solution_catches_perturbation(disk_volume):
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=2, stokes=False)
    sol = solve(cp, SolverConfig())
    base = check_solution(cp, sol)
    key = (GROUP_MAIN, (0, 0))
    sol.primal[key] += 1e-3
    bumped = check_solution(cp, sol)
    assert bumped.max_eq_residual == pytest.approx(base.max_eq_residual + 1e-3, abs=1e-9)


def test_weak_duality_gap(disk_volume):
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=3, stokes=False)
    sol = solve(cp, SolverConfig())
    assert sol.residuals.relative_gap <= 1e-6
    assert sol.dual_objective >= sol.objective - 1e-6


def test_determinism_across_runs(disk_volume):
    K, lam = disk_volume(1.1)
    cp = assemble_volume_relaxation(K, lam, d=3, stokes=True)
    s1 = solve(cp, SolverConfig())
    s2 = solve(cp, SolverConfig())
    assert s1.status == s2.status
    assert s1.objective == pytest.approx(s2.objective, abs=1e-9)


def test_infeasible_status_reported():
    basis = [(0,)]
    meta = ProblemMeta(nvars=1, n=1, p=0, d=0, stokes=False, basis=basis,
                       moment_row_count=1)
    rows = [(LinearForm({(GROUP_MAIN, (0,)): 1.0}), -1.0)]
    blocks = [PsdBlock("y", 1, {(0, 0): (((GROUP_MAIN, (0,)), 1.0),)})]
    cp = ConicProblem(LinearForm({(GROUP_MAIN, (0,)): 1.0}), rows, blocks, meta)
    sol = solve(cp, SolverConfig())
    assert sol.status is SolveStatus.INFEASIBLE


def test_unbounded_status_reported():
    basis = [(0,)]
    meta = ProblemMeta(nvars=1, n=1, p=0, d=0, stokes=False, basis=basis,
                       moment_row_count=1)
    rows = [(LinearForm({(GROUP_COMP, (0,)): 1.0}), 1.0)]
    blocks = [PsdBlock("z", 1, {(0, 0): (((GROUP_COMP, (0,)), 1.0),)})]
    cp = ConicProblem(LinearForm({(GROUP_MAIN, (0,)): 1.0}), rows, blocks, meta)
    sol = solve(cp, SolverConfig())
    assert sol.status in (SolveStatus.UNBOUNDED, SolveStatus.NUMERICAL_FAILURE)


def test_dual_certificate_at_least_one_on_set(disk_volume):
    """Without Stokes rows the dual polynomial must dominate 1 on K."""
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=3, stokes=False)
    sol = solve(cp, SolverConfig())
    assert sol.status.usable()
    duals = sol.eq_duals[:cp.meta.moment_row_count]
    xs = np.linspace(-1, 1, 50)
    worst = np.inf
    for x1 in xs:
        for x2 in xs:
            if x1 * x1 + x2 * x2 <= 1.0:
                p = sum(c * x1 ** a[0] * x2 ** a[1]
                        for c, a in zip(duals, cp.meta.basis))
                worst = min(worst, p)
    assert worst >= 1.0 - 1e-5


def test_auto_backend_picks_by_block_size(disk_volume):
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=3, stokes=False)
    cfg_small = SolverConfig(backend="auto")
    assert cfg_small.resolve_backend(cp) == "clarabel"
    cfg_tiny_threshold = SolverConfig(backend="auto", large_block_threshold=5)
    assert cfg_tiny_threshold.resolve_backend(cp) == "scs"


def test_sdpa_dump_structure(tmp_path, disk_volume):
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=2, stokes=False,
                                    options=AssemblyOptions(z_support=False))
    path = str(tmp_path / "dump.dat-s")
    write_sdpa(cp, path)
    lines = open(path).read().strip().splitlines()
    assert lines[0].startswith('"')
    assert int(lines[1].split()[0]) == cp.num_vars
    nblocks = int(lines[2].split()[0])
    sizes = lines[3].split()[:nblocks]
    assert len(sizes) == len(cp.psd_blocks) + 1
    assert int(sizes[-1]) == -2 * len(cp.eq_rows)
    # entry lines parse as: mat block i j value
    for ln in lines[5:10]:
        parts = ln.split()
        assert len(parts) == 5
        int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])


def test_dump_happens_through_config(tmp_path, disk_volume):
    K, lam = disk_volume(1.0)
    cp = assemble_volume_relaxation(K, lam, d=2, stokes=False)
    path = str(tmp_path / "cfg_dump.dat-s")
    solve(cp, SolverConfig(dump_path=path))
    assert os.path.exists(path)

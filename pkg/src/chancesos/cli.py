"""Command line interface.

    chancesos run problem.yaml [flags]       solve and write result documents
    chancesos validate problem.yaml [flags]  solve, then check against the oracle

Exit codes: 0 success, 1 validation check failed, 2 input error,
3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from typing import Dict, List

import numpy as np

from . import __version__
from .measures import BoxDomain
from .oracle import GridSpec, mu_Kx, reference_volume, symdiff_measure
from .pipeline import (ApproximationResult, ChanceProblem, PipelineError,
                       SolveFailedError, compute_inner, compute_outer,
                       compute_volume_bound, extract_intervals_1d)
from .problemfile import LoadedProblem, ProblemFileError, load_problem_file
from .solver import SolverConfig

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_FAILURE = 3


def _parse_degree_range(text: str) -> List[int]:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return sorted(int(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chancesos",
                                 description="Moment-SOS approximations of "
                                             "chance-constrained feasible sets")
    ap.add_argument("--version", action="version", version=f"chancesos {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "solve a problem file and write result documents"),
                        ("validate", "solve and check the results against the oracle")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("problem", help="problem file (YAML)")
        sp.add_argument("--degree-range", type=_parse_degree_range, default=None,
                        metavar="LO:HI|D1,D2,..", help="hierarchy orders to run")
        sp.add_argument("--stokes", action=argparse.BooleanOptionalAction, default=None,
                        help="toggle Stokes acceleration rows")
        sp.add_argument("--epsilon", action="append", type=float, default=None,
                        metavar="EPS", help="probability level (repeatable)")
        sp.add_argument("--grid-res", type=int, default=None,
                        help="grid resolution for CSV output and checks")
        sp.add_argument("--validate", action="store_true",
                        help="also run oracle checks (implicit for 'validate')")
        sp.add_argument("--inner", action="store_true", default=None,
                        help="also compute inner approximations (needs a complement)")
        sp.add_argument("--dump-sdp", action="store_true",
                        help="write each conic problem in SDPA sparse format")
        sp.add_argument("--seed", type=int, default=0, help="RNG seed for sampling checks")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--backend", default="auto", choices=("auto", "clarabel", "scs"))
        sp.add_argument("--tol", type=float, default=None,
                        help="solver feasibility/gap tolerance")
        sp.add_argument("--verbose", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# output documents


def _atomic_write_text(path: str, content: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-out-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _poly_doc(p) -> dict:
    terms = sorted(p.terms.items(), key=lambda kv: (sum(kv[0]), tuple(-e for e in kv[0])))
    return {"nvars": p.nvars, "terms": [[list(a), c] for a, c in terms]}


def _result_doc(loaded: LoadedProblem, res: ApproximationResult, role: str,
                epsilons: List[float]) -> dict:
    doc = {
        "schema": 1,
        "problem": loaded.name,
        "kind": loaded.kind,
        "role": role,
        "d": res.d,
        "stokes": res.stokes,
        "rho": res.rho,
        "status": res.status.value,
        "qualified": res.qualified,
        "backend": res.backend,
        "residuals": {
            "max_eq_residual": res.residuals.max_eq_residual,
            "min_psd_eigenvalue": res.residuals.min_psd_eigenvalue,
            "relative_gap": res.residuals.relative_gap,
            "primal_objective": res.residuals.primal_objective,
            "dual_objective": res.residuals.dual_objective,
        },
        "consistency_residual": res.consistency_residual,
        "epsilons": list(epsilons),
        "h": _poly_doc(res.h),
        "warnings": list(res.warnings),
        "wall_time": res.wall_time,
    }
    if loaded.chance is not None and loaded.chance.n == 1:
        doc["intervals"] = {
            _fmt_eps(e): [[a, b] for a, b in
                          extract_intervals_1d(res.h, 1.0 - e, loaded.chance.x_box)]
            for e in epsilons
        }
    return doc


def _fmt_eps(e: float) -> str:
    return f"{e:g}"


def _x_grid_points(box: BoxDomain, res: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, res) for lo, hi in zip(box.lows, box.highs)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _grid_csv(loaded: LoadedProblem, outer: ApproximationResult,
              inner: ApproximationResult | None, epsilons: List[float],
              grid_res: int, with_oracle: bool, oracle_grid: GridSpec) -> str:
    problem = loaded.chance
    pts = _x_grid_points(problem.x_box, grid_res)
    cols: Dict[str, np.ndarray] = {}
    for i in range(problem.n):
        cols[f"x{i+1}"] = pts[:, i]
    hvals = np.array([outer.h(tuple(r)) for r in pts])
    cols["h"] = hvals
    if with_oracle:
        cols["mu_oracle"] = np.array([mu_Kx(problem, tuple(r), oracle_grid) for r in pts])
    for e in epsilons:
        cols[f"member_outer_{_fmt_eps(e)}"] = (hvals >= 1.0 - e).astype(int)
    if inner is not None:
        ivals = np.array([inner.h(tuple(r)) for r in pts])
        cols["h_inner"] = ivals
        for e in epsilons:
            cols[f"member_inner_{_fmt_eps(e)}"] = (ivals >= 1.0 - e).astype(int)
    header = ",".join(cols)
    lines = [header]
    names = list(cols)
    for r in range(pts.shape[0]):
        lines.append(",".join(
            str(int(cols[c][r])) if cols[c].dtype.kind == "i" else repr(float(cols[c][r]))
            for c in names))
    return "\n".join(lines) + "\n"


def _json_dump(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# checks


def _run_checks(loaded: LoadedProblem, outers: List[ApproximationResult],
                inners: List[ApproximationResult], epsilons: List[float],
                grid_res: int, seed: int) -> List[dict]:
    problem = loaded.chance
    checks: List[dict] = []
    ogrid = GridSpec(resolution=max(64, min(grid_res, 512)), seed=seed)
    pts = _x_grid_points(problem.x_box, min(grid_res, 201))
    mu_vals = np.array([mu_Kx(problem, tuple(r), ogrid) for r in pts])
    for res in outers:
        hvals = np.array([res.h(tuple(r)) for r in pts])
        worst = float(np.max(mu_vals - hvals))
        checks.append({
            "check": "containment", "d": res.d, "stokes": res.stokes,
            "worst_violation": worst, "passed": bool(worst <= 1e-5),
        })
        rel = res.consistency_residual / max(1.0, abs(res.rho))
        checks.append({
            "check": "consistency-identity", "d": res.d, "stokes": res.stokes,
            "relative_residual": rel, "passed": bool(rel <= 1e-6),
        })
    rhos = [(r.d, r.rho) for r in outers]
    mono = all(r2 <= r1 + 1e-6 * max(1.0, abs(r1))
               for (_, r1), (_, r2) in zip(rhos, rhos[1:]))
    checks.append({"check": "monotonicity", "bounds": rhos, "passed": bool(mono)})
    if len(outers) >= 2:
        sym_grid = GridSpec(resolution=max(grid_res, 401), seed=seed)
        for e in epsilons:
            first, _ = symdiff_measure(outers[0].h, e, problem, sym_grid)
            last, err = symdiff_measure(outers[-1].h, e, problem, sym_grid)
            checks.append({
                "check": "symmetric-difference-decrease", "epsilon": e,
                "first": first, "last": last, "error_bar": err,
                "passed": bool(last <= first + err),
            })
    for inner in inners:
        outer = next((o for o in outers if o.d == inner.d), None)
        if outer is None:
            continue
        ivals = np.array([inner.h(tuple(r)) for r in pts])
        ovals = np.array([outer.h(tuple(r)) for r in pts])
        for e in epsilons:
            ok = bool(np.all((ivals >= 1.0 - e) <= (ovals >= 1.0 - e)))
            checks.append({"check": "inner-inside-outer", "d": inner.d,
                           "epsilon": e, "passed": ok})
    return checks


# ---------------------------------------------------------------------------
# commands


def _solver_config(args, out_dir: str, d: int, stokes: bool) -> SolverConfig:
    tol = args.tol
    kwargs = dict(backend=args.backend, verbose=args.verbose)
    if tol is not None:
        kwargs.update(feas_tol=tol, gap_tol=tol)
    if args.dump_sdp:
        tag = "stokes" if stokes else "nostokes"
        kwargs.update(dump_path=os.path.join(out_dir, f"problem_d{d}_{tag}.dat-s"))
    return SolverConfig(**kwargs)


def _run_volume(loaded: LoadedProblem, args, out_dir: str) -> int:
    degrees = args.degree_range or loaded.run.degrees or [2, 3]
    stokes_settings = [args.stokes] if args.stokes is not None else [False, True]
    rows = []
    print("d  stokes  bound        status        time")
    for d in degrees:
        for st in stokes_settings:
            cfg = _solver_config(args, out_dir, d, st)
            vb = compute_volume_bound(loaded.volume_set, loaded.volume_measure, d,
                                      stokes=st, config=cfg,
                                      options=loaded.run.assembly,
                                      scale=loaded.run.scale)
            rows.append({"d": d, "stokes": st, "rho": vb.rho,
                         "status": vb.status.value, "backend": vb.backend,
                         "wall_time": vb.wall_time})
            print(f"{d:<2} {str(st):<7} {vb.rho:<12.6f} {vb.status.value:<13} "
                  f"{vb.wall_time:.2f}s")
    doc = {"schema": 1, "problem": loaded.name, "kind": "volume", "bounds": rows}
    _atomic_write_text(os.path.join(out_dir, "volume_results.json"), _json_dump(doc))
    if args.do_validate:
        ref = reference_volume(loaded.volume_set, loaded.volume_measure,
                               GridSpec(resolution=1024 if loaded.volume_set.nvars <= 2 else 128,
                                        seed=args.seed))
        ok = all(r["rho"] >= ref - 1e-6 for r in rows)
        by_st: Dict[bool, List[dict]] = {}
        for r in rows:
            by_st.setdefault(r["stokes"], []).append(r)
        mono = all(b["rho"] <= a["rho"] + 1e-6
                   for seq in by_st.values() for a, b in zip(seq, seq[1:]))
        checks = [
            {"check": "upper-bound", "reference": ref, "passed": bool(ok)},
            {"check": "monotonicity", "passed": bool(mono)},
        ]
        _atomic_write_text(os.path.join(out_dir, "validation.json"),
                           _json_dump({"schema": 1, "checks": checks}))
        for c in checks:
            print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['check']}")
        if not all(c["passed"] for c in checks):
            return EXIT_CHECK_FAILED
    return EXIT_OK


def _run_chance(loaded: LoadedProblem, args, out_dir: str) -> int:
    problem = loaded.chance
    degrees = args.degree_range or loaded.run.degrees or [3]
    stokes = loaded.run.stokes if args.stokes is None else args.stokes
    epsilons = args.epsilon if args.epsilon is not None else list(problem.epsilons)
    grid_res = args.grid_res or loaded.run.grid_resolution
    do_inner = loaded.run.inner if args.inner is None else args.inner
    ogrid = GridSpec(resolution=256, seed=args.seed)

    outers: List[ApproximationResult] = []
    inners: List[ApproximationResult] = []
    for d in degrees:
        cfg = _solver_config(args, out_dir, d, stokes)
        res = compute_outer(problem, d, stokes=stokes, config=cfg,
                            options=loaded.run.assembly, scale=loaded.run.scale)
        outers.append(res)
        tag = "stokes" if stokes else "nostokes"
        inner = None
        if do_inner:
            inner = compute_inner(problem, d, stokes=stokes, config=cfg,
                                  options=loaded.run.assembly, scale=loaded.run.scale,
                                  overlap_seed=args.seed)
            inners.append(inner)
        doc = _result_doc(loaded, res, "outer", epsilons)
        if inner is not None:
            doc["inner"] = _result_doc(loaded, inner, "inner", epsilons)
        _atomic_write_text(os.path.join(out_dir, f"result_d{d}_{tag}.json"),
                           _json_dump(doc))
        csv = _grid_csv(loaded, res, inner, epsilons, grid_res,
                        with_oracle=args.do_validate, oracle_grid=ogrid)
        _atomic_write_text(os.path.join(out_dir, f"grid_d{d}_{tag}.csv"), csv)
        print(f"d={d} stokes={stokes}: bound={res.rho:.6f} status={res.status.value} "
              f"backend={res.backend} time={res.wall_time:.2f}s")
        for e in epsilons:
            if problem.n == 1:
                ivs = extract_intervals_1d(res.h, 1.0 - e, problem.x_box)
                span = " u ".join(f"[{a:.4f}, {b:.4f}]" for a, b in ivs)
                print(f"  eps={_fmt_eps(e)}: outer set {span if span else '(empty)'}")

    if args.do_validate:
        checks = _run_checks(loaded, outers, inners, epsilons, grid_res, args.seed)
        _atomic_write_text(os.path.join(out_dir, "validation.json"),
                           _json_dump({"schema": 1, "checks": checks}))
        failed = [c for c in checks if not c["passed"]]
        for c in checks:
            extra = {k: v for k, v in c.items() if k not in ("check", "passed")}
            print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['check']} {extra}")
        if failed:
            return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.do_validate = args.validate or args.command == "validate"
    try:
        loaded = load_problem_file(args.problem)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out_dir = args.out or (os.path.splitext(os.path.basename(args.problem))[0] + "_results")
    os.makedirs(out_dir, exist_ok=True)
    try:
        if loaded.kind == "volume":
            return _run_volume(loaded, args, out_dir)
        return _run_chance(loaded, args, out_dir)
    except SolveFailedError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Problem files: a small YAML schema mapping to pipeline instances.

Constraints are polynomial expression strings over x1..xn and w1..wp, so the
published form of an instance can be transcribed verbatim and reviewed as a
diff. See problems/ in the repository root for worked examples.

Schema (version 1):

    schema: 1
    kind: chance | volume
    variables: {x: n, omega: p}          # omega only for chance
    domain:
      x: [[lo, hi], ...]                 # n pairs
      omega: [[lo, hi], ...]             # p pairs
    constraints: [expr, ...]             # each expr >= 0, over x1.., w1..
    measures:
      lambda: lebesgue | uniform | {density: expr, kind: polynomial|exp-polynomial,
                                    normalize: bool}
      mu: uniform | lebesgue | {...}     # must integrate to 1
    run:
      epsilons: [0.5, ...]
      degrees: [4, 8] | {min: 4, max: 8}
      stokes: true
      inner: false
      auto_ball: true
      z_support: true
      scale: true
      grid_resolution: 401
    complement:                          # optional, enables inner runs
      - [expr, ...]                      # one list per basic piece
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import yaml

from .measures import BoxDomain, MeasureSpec
from .parsing import ParseError, parse_polynomial
from .pipeline import ChanceProblem
from .polynomials import Polynomial
from .program import AssemblyOptions, SemiAlgebraicSet

SCHEMA_VERSION = 1


class ProblemFileError(ValueError):
    """Problem file cannot be interpreted; message carries the key path."""


@dataclass
class RunOptions:
    epsilons: List[float] = field(default_factory=list)
    degrees: List[int] = field(default_factory=list)
    stokes: bool = True
    inner: bool = False
    scale: bool = True
    grid_resolution: int = 401
    assembly: AssemblyOptions = AssemblyOptions()


@dataclass
class LoadedProblem:
    kind: str  # "chance" | "volume"
    name: str
    run: RunOptions
    chance: ChanceProblem | None = None
    volume_set: SemiAlgebraicSet | None = None
    volume_measure: MeasureSpec | None = None
    var_names: List[str] = field(default_factory=list)


def _need(doc: Dict[str, Any], key: str, where: str = "document"):
    if key not in doc:
        raise ProblemFileError(f"missing key {key!r} in {where}")
    return doc[key]


def _box(raw: Any, dim: int, where: str) -> BoxDomain:
    if not isinstance(raw, list) or len(raw) != dim:
        raise ProblemFileError(f"{where} must be a list of {dim} [lo, hi] pairs")
    lows, highs = [], []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ProblemFileError(f"{where}[{i}] must be a [lo, hi] pair")
        lows.append(float(pair[0]))
        highs.append(float(pair[1]))
    try:
        return BoxDomain(tuple(lows), tuple(highs))
    except ValueError as exc:
        raise ProblemFileError(f"{where}: {exc}")


def _measure(raw: Any, box: BoxDomain, var_names: List[str], where: str,
             probability_default: bool) -> MeasureSpec:
    if raw is None:
        return MeasureSpec.uniform(box) if probability_default else MeasureSpec.lebesgue(box)
    if isinstance(raw, str):
        if raw == "lebesgue":
            return MeasureSpec.lebesgue(box)
        if raw == "uniform":
            return MeasureSpec.uniform(box)
        raise ProblemFileError(f"{where}: unknown measure {raw!r} "
                               "(expected 'lebesgue', 'uniform' or a density mapping)")
    if isinstance(raw, dict):
        expr = _need(raw, "density", where)
        dens = _parse(expr, var_names, f"{where}.density")
        kind = raw.get("kind", "polynomial")
        normalize = bool(raw.get("normalize", False))
        try:
            if kind == "polynomial":
                return MeasureSpec.polynomial_density(box, dens, normalize=normalize)
            if kind == "exp-polynomial":
                return MeasureSpec.exp_polynomial_density(box, dens, normalize=normalize)
        except ValueError as exc:
            raise ProblemFileError(f"{where}: {exc}")
        raise ProblemFileError(f"{where}.kind: unknown density kind {kind!r}")
    raise ProblemFileError(f"{where}: cannot interpret measure specification")


def _parse(expr: Any, var_names: List[str], where: str) -> Polynomial:
    if not isinstance(expr, str):
        raise ProblemFileError(f"{where}: constraint must be an expression string")
    try:
        return parse_polynomial(expr, var_names)
    except ParseError as exc:
        raise ProblemFileError(f"{where}: {exc}")


def _degrees(raw: Any, where: str) -> List[int]:
    if raw is None:
        return []
    if isinstance(raw, dict):
        lo = int(_need(raw, "min", where))
        hi = int(_need(raw, "max", where))
        if lo > hi:
            raise ProblemFileError(f"{where}: min > max")
        return list(range(lo, hi + 1))
    if isinstance(raw, list):
        return sorted(int(v) for v in raw)
    return [int(raw)]


def load_problem_file(path: str) -> LoadedProblem:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise ProblemFileError(f"no such file: {path}")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ProblemFileError(f"invalid YAML{loc}: {exc}")
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must be a mapping")
    schema = doc.get("schema")
    if schema != SCHEMA_VERSION:
        raise ProblemFileError(f"unsupported schema {schema!r} (expected {SCHEMA_VERSION})")
    kind = doc.get("kind", "chance")
    if kind not in ("chance", "volume"):
        raise ProblemFileError(f"kind must be 'chance' or 'volume', got {kind!r}")
    name = str(doc.get("name", path))

    variables = _need(doc, "variables")
    n = int(_need(variables, "x", "variables"))
    p = int(variables.get("omega", 0))
    if n < 1:
        raise ProblemFileError("variables.x must be >= 1")
    if kind == "chance" and p < 1:
        raise ProblemFileError("chance problems need variables.omega >= 1")

    var_names = [f"x{i+1}" for i in range(n)] + [f"w{j+1}" for j in range(p)]
    domain = _need(doc, "domain")
    x_box = _box(_need(domain, "x", "domain"), n, "domain.x")
    omega_box = _box(_need(domain, "omega", "domain"), p, "domain.omega") if p else None

    raw_constraints = _need(doc, "constraints")
    if not isinstance(raw_constraints, list) or not raw_constraints:
        raise ProblemFileError("constraints must be a nonempty list of expressions")
    constraints = tuple(_parse(e, var_names, f"constraints[{i}]")
                        for i, e in enumerate(raw_constraints))

    run_raw = doc.get("run", {}) or {}
    run = RunOptions(
        epsilons=[float(e) for e in run_raw.get("epsilons", [])],
        degrees=_degrees(run_raw.get("degrees"), "run.degrees"),
        stokes=bool(run_raw.get("stokes", True)),
        inner=bool(run_raw.get("inner", False)),
        scale=bool(run_raw.get("scale", True)),
        grid_resolution=int(run_raw.get("grid_resolution", 401)),
        assembly=AssemblyOptions(
            auto_ball=bool(run_raw.get("auto_ball", True)),
            z_support=bool(run_raw.get("z_support", True)),
        ),
    )

    measures = doc.get("measures", {}) or {}
    if kind == "volume":
        lam = _measure(measures.get("lambda"), x_box, var_names[:n],
                       "measures.lambda", probability_default=False)
        K = SemiAlgebraicSet(n, constraints)
        return LoadedProblem(kind="volume", name=name, run=run,
                             volume_set=K, volume_measure=lam, var_names=var_names)

    lam = _measure(measures.get("lambda"), x_box, var_names[:n],
                   "measures.lambda", probability_default=False)
    mu = _measure(measures.get("mu"), omega_box, var_names[n:],
                  "measures.mu", probability_default=True)
    if not mu.is_probability():
        raise ProblemFileError(
            "measures.mu must integrate to 1 over omega's box; "
            "use 'uniform' or a density with normalize: true")
    complement: List[SemiAlgebraicSet] = []
    for i, piece in enumerate(doc.get("complement", []) or []):
        if not isinstance(piece, list) or not piece:
            raise ProblemFileError(f"complement[{i}] must be a nonempty list of expressions")
        polys = tuple(_parse(e, var_names, f"complement[{i}][{j}]")
                      for j, e in enumerate(piece))
        complement.append(SemiAlgebraicSet(n + p, polys))
    try:
        chance = ChanceProblem(
            n=n, p=p, x_box=x_box, omega_box=omega_box,
            constraints=SemiAlgebraicSet(n + p, constraints),
            lam=lam, mu=mu, epsilons=tuple(run.epsilons),
            complement=tuple(complement))
    except ValueError as exc:
        raise ProblemFileError(str(exc))
    return LoadedProblem(kind="chance", name=name, run=run, chance=chance,
                         var_names=var_names)

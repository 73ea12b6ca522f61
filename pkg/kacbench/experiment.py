"""
Experiment files and the experiment runner.

An experiment file is a TOML document naming a `command`, the `system` it runs on and
the command `params`. It is validated against `experiment.schema.json` first (for
location-bearing messages about the structure), and then parsed into pydantic models.
"""
from __future__ import annotations

from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Type, Union

import numpy as np
import toml
from pydantic import BaseModel, Extra, ValidationError, conint, root_validator
from typing_extensions import Literal

from . import pkg_res
from .allocation import (
    Allocation,
    AllocationStrategy,
    cell,
    cell_sizes,
    check_kac_partition,
    check_return_time_cells,
    forward_hitting_allocation,
    greedy_allocation,
    induced_map_is_measure_preserving,
    kac_function,
    table_allocation,
    tail_bound_check,
    transport_inequality,
    verify_allocation_identity,
    verify_return_time_identity,
)
from .config import conf
from .errors import AbstentionError, ArgumentError, InconclusiveError, KacbenchError
from .estimate import DEFAULT_SAMPLES
from .generator import (
    finite_orbit_census,
    generator_partition,
    reconstruct_and_verify,
    sweep_out_partition,
)
from .log import child
from .relation import (
    EquivRelation,
    TauMap,
    check_bridge,
    first_return_tau,
    orbit_relation,
    pushforward_preserved,
    validate_relation,
    verify_relation_kac,
)
from .report import Report, ReportBody, ReportHeader, Status, write_csv
from .system import (
    AnySystem,
    BoxSet,
    CylinderSet,
    FiniteSystem,
    IntervalSet,
    ResidueSet,
    SampledKind,
    SampledSystem,
    golden_alpha,
    sqrt_alpha,
)
from .util import ExitCode, ExtendedRational, Rational, load_json, save_json, validate_json
from .voronoi import (
    HittingSet,
    LatticeCell,
    cells_svg,
    greedy_cell,
    hitting_set,
    sandwich_check,
    voronoi_cells,
)

log = child(__name__)

EXPERIMENT_SCHEMA_FILE = "experiment.schema.json"
EXPERIMENTS_DIR = "experiments"

_schema = None


def experiment_schema():
    """The JSON Schema of experiment files (loaded once)."""
    global _schema
    if _schema is None:
        _schema = load_json(pkg_res(EXPERIMENT_SCHEMA_FILE))
    return _schema


class Command(str, Enum):
    VERIFY_KAC = "verify-kac"
    VERIFY_ALLOCATION = "verify-allocation"
    KAC_FUNCTION = "kac-function"
    VORONOI_CELLS = "voronoi-cells"
    RELATION_CHECK = "relation-check"
    GENERATOR_DEMO = "generator-demo"
    CENSUS = "census"


class ExperimentError(KacbenchError, ValueError):
    """An experiment file cannot be loaded, or does not fit its system."""


################################################################
# system descriptors


class FiniteSystemSpec(BaseModel):
    """
    A finite system, given by exactly one of `generators`, `cycles`, `cyclic` or `grid`.

    Masses are uniform unless given.
    """

    class Config:
        extra = Extra.forbid

    kind: Literal["finite"]
    group: Optional[str] = None
    """Acting group (default: Z, or Z^2 for grids)."""

    generators: Optional[List[List[int]]] = None
    cycles: Optional[List[List[int]]] = None
    cyclic: Optional[conint(ge=1)] = None  # type: ignore
    grid: Optional[Tuple[conint(ge=1), conint(ge=1), int]] = None  # type: ignore
    """(a, b, shift): Z^2 acting on Z^2 / <(a, 0), (shift, b)>."""

    masses: Optional[List[Rational]] = None

    @root_validator(skip_on_failure=True)
    def check_shape(cls, values):
        given = [k for k in ("generators", "cycles", "cyclic", "grid") if values[k] is not None]
        if len(given) != 1:
            raise ValueError(
                "give exactly one of generators, cycles, cyclic or grid "
                f"(got: {', '.join(given) or 'none'})"
            )
        if values["cycles"] is not None and values["group"] not in (None, "Z"):
            raise ValueError("cycles describe a Z-action")
        try:
            cls._build(values)
        except ValidationError as err:
            raise ValueError("; ".join(_describe(err)))
        except KacbenchError as err:
            raise ValueError(str(err))
        return values

    @staticmethod
    def _build(values: Dict[str, Any]) -> FiniteSystem:
        masses = values["masses"]
        if values["generators"] is not None:
            return FiniteSystem.from_permutations(
                values["generators"], masses, values["group"] or "Z"
            )
        if values["cycles"] is not None:
            return FiniteSystem.from_cycles(values["cycles"], masses)
        if values["cyclic"] is not None:
            return FiniteSystem.cyclic(values["cyclic"], masses, values["group"] or "Z")
        a, b, shift = values["grid"]
        fs = FiniteSystem.grid(a, b, shift, values["group"] or "Z^2")
        if masses is not None:
            fs = FiniteSystem(group=fs.group, masses=masses, generators=fs.generators)
        return fs

    def build(self) -> FiniteSystem:
        return self._build(self.dict())


class SampledSystemSpec(BaseModel):
    """
    A sampled system. Rotation numbers may be given as decimals or by name:
    'golden' for the golden mean, 'sqrtN' for the fractional part of sqrt(N).
    """

    class Config:
        extra = Extra.forbid

    kind: Literal["rotation", "torus", "odometer", "cyclic"]
    alpha: Optional[List[str]] = None
    depth: conint(ge=1, le=63) = 63  # type: ignore
    n: Optional[conint(ge=1)] = None  # type: ignore

    @root_validator(skip_on_failure=True)
    def check_system(cls, values):
        try:
            cls._build(values, 0)
        except ValidationError as err:
            raise ValueError("; ".join(_describe(err)))
        return values

    @staticmethod
    def _build(values: Dict[str, Any], seed: int) -> SampledSystem:
        alpha = values["alpha"]
        if alpha is None and values["kind"] == SampledKind.ROTATION.value:
            alpha = ["golden"]
        return SampledSystem(
            kind=values["kind"],
            alpha=[_named_alpha(a) for a in alpha or []],
            depth=values["depth"],
            n=values["n"],
            seed=seed,
        )

    def build(self, seed: int) -> SampledSystem:
        return self._build(self.dict(), seed)


def _named_alpha(a: str) -> str:
    if a == "golden":
        return golden_alpha()
    if a.startswith("sqrt") and a[4:].isdigit():
        return sqrt_alpha(int(a[4:]))
    return a


SystemSpec = Union[FiniteSystemSpec, SampledSystemSpec]

################################################################
# command parameters

SampledSetSpec = Union[IntervalSet, BoxSet, CylinderSet, ResidueSet]
SetSpec = Union[List[int], SampledSetSpec]
"""Points of a finite system, or a set of a sampled system."""

FunctionSpec = Union[List[ExtendedRational], ExtendedRational]
"""Values of f on the points of a finite system, or a constant."""


class Params(BaseModel):
    class Config:
        extra = Extra.forbid


class VerifyKacParams(Params):
    target: SetSpec
    check_cells: bool = True
    """Also compare the forward hitting cells with the return times."""


class AllocationParams(Params):
    target: SetSpec
    allocation: AllocationStrategy = AllocationStrategy.GREEDY
    table: Optional[Dict[int, List[int]]] = None
    """kappa as a table (point -> group element), for allocation = 'table'."""

    @root_validator(skip_on_failure=True)
    def check_table(cls, values):
        is_table = values["allocation"] == AllocationStrategy.TABLE
        if is_table != (values["table"] is not None):
            raise ValueError("a table is needed exactly for allocation = 'table'")
        return values


class VerifyAllocationParams(AllocationParams):
    f: FunctionSpec = Fraction(1)
    f_indicator: Optional[SampledSetSpec] = None
    """On sampled systems: f is the indicator function of this set."""

    histogram: bool = True
    """Write the distribution of cell sizes as a CSV table."""

    histogram_samples: conint(ge=1) = 10_000  # type: ignore


class KacFunctionParams(AllocationParams):
    target: List[int]
    universal: bool = False
    f: Optional[FunctionSpec] = None
    shapes: Optional[List[conint(ge=1)]] = None  # type: ignore
    """Restrict the transport of f to these shape indices (1-based)."""


class VoronoiParams(Params):
    hits: Optional[List[List[int]]] = None
    """An explicit hitting set (0 is added)."""

    radius: Optional[conint(ge=0)] = None  # type: ignore
    """Radius of the scan that found `hits` (absent: `hits` is complete)."""

    cell: Optional[List[List[int]]] = None
    """A cell to check against the Voronoi cells (default: the greedy cell)."""

    target: Optional[SetSpec] = None
    point: Optional[Union[int, List[str]]] = None
    """A point of the target (an index, or decimal coordinates on sampled systems)."""

    svg: bool = True

    @root_validator(skip_on_failure=True)
    def check_source(cls, values):
        explicit = values["hits"] is not None
        derived = values["target"] is not None and values["point"] is not None
        if explicit == derived:
            raise ValueError("give either hits, or target and point")
        if derived and values["radius"] is None:
            raise ValueError("a radius is needed to scan for hits")
        return values


class RelationParams(Params):
    classes: Optional[List[List[int]]] = None
    masses: Optional[List[Rational]] = None
    tau: Optional[List[int]] = None
    first_return: Optional[List[int]] = None
    """Use the first return map to this set of a finite Z-system as tau."""

    f: FunctionSpec = Fraction(1)

    @root_validator(skip_on_failure=True)
    def check_tau(cls, values):
        if (values["tau"] is None) == (values["first_return"] is None):
            raise ValueError("give exactly one of tau and first_return")
        if values["classes"] is None and values["tau"] is None:
            raise ValueError("a relation given by its classes needs an explicit tau")
        if values["classes"] is None and values["masses"] is not None:
            raise ValueError("masses belong to a relation given by its classes")
        return values


class GeneratorParams(Params):
    epsilon: Optional[Rational] = None
    n_max: conint(ge=1) = 16  # type: ignore
    targets: List[List[int]] = []
    """Disjoint sweep-out targets A_1, ... (default: the sweep-out partition)."""

    sets: List[List[int]] = []
    """The sets E_1, ... to encode and reconstruct."""

    @root_validator(skip_on_failure=True)
    def check_family(cls, values):
        sets, targets = values["sets"], values["targets"]
        if sets and not targets and values["epsilon"] is None:
            raise ValueError("sets need targets, or epsilon to derive them")
        if sets and targets and len(sets) != len(targets):
            raise ValueError("give one set per target")
        return values


class CensusParams(Params):
    pass


PARAMS: Dict[Command, Type[Params]] = {
    Command.VERIFY_KAC: VerifyKacParams,
    Command.VERIFY_ALLOCATION: VerifyAllocationParams,
    Command.KAC_FUNCTION: KacFunctionParams,
    Command.VORONOI_CELLS: VoronoiParams,
    Command.RELATION_CHECK: RelationParams,
    Command.GENERATOR_DEMO: GeneratorParams,
    Command.CENSUS: CensusParams,
}


################################################################
# experiments


class ExperimentConfig(BaseModel):
    """A parsed experiment file."""

    class Config:
        extra = Extra.forbid

    command: Command
    name: Optional[str] = None
    """Stem of the report files (default: the command)."""

    seed: conint(ge=0, lt=2**64) = 0  # type: ignore
    samples: conint(ge=2) = DEFAULT_SAMPLES  # type: ignore
    budget: Optional[conint(gt=0)] = None  # type: ignore
    """Per-point evaluation budget (default: from the settings)."""

    system: Optional[SystemSpec] = None
    params: Params

    @root_validator(pre=True)
    def parse_parts(cls, values):
        command = values.get("command")
        if isinstance(command, Command):
            command = command.value
        params = values.get("params", {})
        if command in {c.value for c in Command} and isinstance(params, dict):
            values["params"] = _parse_part("params", PARAMS[Command(command)], params)
        system = values.get("system")
        if isinstance(system, dict):
            finite = system.get("kind") == "finite"
            spec = FiniteSystemSpec if finite else SampledSystemSpec
            values["system"] = _parse_part("system", spec, system)
        return values

    @root_validator(skip_on_failure=True)
    def check_system(cls, values):
        command, system, params = values["command"], values["system"], values["params"]
        needs_system = command not in (Command.VORONOI_CELLS, Command.RELATION_CHECK)
        if command == Command.VORONOI_CELLS:
            needs_system = params.hits is None
        if command == Command.RELATION_CHECK:
            needs_system = params.classes is None
        if needs_system and system is None:
            raise ValueError(f"{command.value} needs a system")
        finite_only = (Command.KAC_FUNCTION, Command.RELATION_CHECK)
        if command in finite_only and system is not None and system.kind != "finite":
            raise ValueError(f"{command.value} needs a finite system")
        return values

    @property
    def stem(self) -> str:
        return self.name or self.command.value

    def effective(self) -> ExperimentConfig:
        """The config with the budget default filled in from the settings."""
        budget = self.budget or conf().kacbench.budget
        return self.copy(update={"budget": budget})

    def with_overrides(
        self,
        seed: Optional[int] = None,
        samples: Optional[int] = None,
        budget: Optional[int] = None,
    ) -> ExperimentConfig:
        """Replace values by command line overrides (and validate them again)."""
        data = self.dict(exclude_none=True)
        data["params"] = self.params.dict()
        if seed is not None:
            data["seed"] = seed
        if samples is not None:
            data["samples"] = samples
        if budget is not None:
            data["budget"] = budget
        data["command"] = self.command.value
        return ExperimentConfig.parse_obj(data)

    def build_system(self) -> Optional[AnySystem]:
        if self.system is None:
            return None
        if isinstance(self.system, FiniteSystemSpec):
            return self.system.build()
        return self.system.build(self.seed)


def _describe(err: ValidationError, prefix: str = "") -> List[str]:
    """Render pydantic errors as 'location: message'."""
    ret = []
    for e in err.errors():
        loc = ".".join([prefix] * bool(prefix) + [str(p) for p in e["loc"] if p != "__root__"])
        ret.append(f"{loc}: {e['msg']}" if loc else e["msg"])
    return ret


def _parse_part(prefix: str, model: Type[BaseModel], data: Any) -> BaseModel:
    """Parse a section, keeping the locations of errors inside of it."""
    try:
        return model.parse_obj(data)
    except ValidationError as err:
        raise ValueError("\n".join(_describe(err, prefix)))


def parse_experiment(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a decoded experiment document and parse it."""
    error = validate_json(data, experiment_schema())
    if error is not None:
        raise ExperimentError(error)
    try:
        return ExperimentConfig.parse_obj(data)
    except ValidationError as err:
        raise ExperimentError("\n".join(_describe(err)))


def load_experiment(path: Path) -> ExperimentConfig:
    """Load an experiment file, raising `ExperimentError` with a location on failure."""
    try:
        data = toml.load(path)
    except FileNotFoundError:
        raise ExperimentError(f"experiment file {path} does not exist")
    except toml.TomlDecodeError as err:
        raise ExperimentError(f"{path}: {err}")
    try:
        return parse_experiment(data)
    except ExperimentError as err:
        raise ExperimentError(f"{path}: {err}")


def example_file(command: Command) -> Path:
    """The shipped example experiment of a command."""
    return pkg_res(EXPERIMENTS_DIR) / f"{command.value}.toml"


################################################################
# running


class Run:
    """Collects the results of one experiment run."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Optional[Path]):
        self.cfg = cfg
        self.out_dir = out_dir
        self.body = ReportBody(
            experiment=cfg.command.value,
            inputs=cfg.dict(exclude_none=True),
        )

    def table(self, suffix: str, header: List[str], rows: List[List[Any]]) -> None:
        name = f"{self.cfg.stem}.{suffix}.csv"
        self.body.files.append(name)
        if self.out_dir is not None:
            write_csv(self.out_dir / name, header, rows)

    def text(self, suffix: str, content: str) -> None:
        name = f"{self.cfg.stem}.{suffix}"
        self.body.files.append(name)
        if self.out_dir is not None:
            (self.out_dir / name).write_text(content)


def _target(system: AnySystem, spec: SetSpec):
    if isinstance(system, FiniteSystem):
        if not isinstance(spec, list):
            raise ArgumentError("targets of finite systems are lists of points")
        return system.point_set(spec)
    if isinstance(spec, list):
        raise ArgumentError("targets of sampled systems are sets like intervals or boxes")
    system.check_set(spec)
    return spec


def _allocation(system: AnySystem, target, p: AllocationParams, budget: int) -> Allocation:
    if p.allocation == AllocationStrategy.GREEDY:
        return greedy_allocation(system, target, budget=budget)
    if p.allocation == AllocationStrategy.FORWARD_HITTING:
        return forward_hitting_allocation(system, target, budget=budget)
    if not isinstance(system, FiniteSystem):
        raise ArgumentError("table allocations need a finite system")
    assert p.table is not None
    return table_allocation(system, target, p.table)


def _integrand(
    ss: SampledSystem, p: VerifyAllocationParams
) -> Callable[[np.ndarray], np.ndarray]:
    if p.f_indicator is not None:
        ss.check_set(p.f_indicator)
        region = p.f_indicator
        return lambda pts: region.contains(pts).astype(float)
    if isinstance(p.f, list):
        raise ArgumentError("on sampled systems f is a constant or f_indicator")
    c = float(p.f)
    return lambda pts: np.full(len(pts), c)


def _run_verify_kac(run: Run, system: AnySystem, p: VerifyKacParams) -> None:
    cfg, body = run.cfg, run.body
    target = _target(system, p.target)
    rep = verify_return_time_identity(system, target, cfg.samples, cfg.seed, cfg.budget)
    if rep.exact:
        body.exact["return_time_integral"] = rep.lhs
        body.exact["mean_return_time"] = rep.mean_return_time
    else:
        body.estimated["return_time_integral"] = rep.lhs_estimate
        body.estimated["mean_return_time"] = rep.mean_return_time_estimate
    body.exact["target_mass"] = rep.target_mass
    body.exact["expected_mean_return_time"] = rep.expected_mean
    body.verdict("return_time_identity", rep.passed)

    if isinstance(system, FiniteSystem):
        induced = induced_map_is_measure_preserving(system, target)
        body.exact["induced_map"] = induced.images
        body.verdict("induced_map_preserves_measure", induced.passed)
    if p.check_cells:
        alloc = forward_hitting_allocation(system, target, budget=cfg.budget)
        cells = check_return_time_cells(
            system, target, alloc, n=min(cfg.samples, 10_000), seed=cfg.seed
        )
        section = body.exact if isinstance(system, FiniteSystem) else body.estimated
        section["return_time_cells"] = cells
        body.verdict("cells_match_return_times", cells.passed)


def _histogram(run: Run, system: AnySystem, alloc: Allocation, p) -> None:
    if isinstance(system, FiniteSystem):
        hist: Dict[int, Fraction] = {}
        for x in sorted(alloc.target):
            if system.masses[x] > 0:
                size = len(cell(system, alloc, x))
                hist[size] = hist.get(size, Fraction(0)) + system.masses[x]
        rows = [[k, hist[k]] for k in sorted(hist)]
        run.table("cells", ["size", "mass"], rows)
        return
    if system.group.rank != 1:
        return  # Z^d cells are too expensive to tabulate in bulk
    pts = system.sample(4, p.histogram_samples)
    pts = pts[alloc.target.contains(pts)]
    sizes = cell_sizes(system, alloc, pts)
    sizes = sizes[~np.isnan(sizes)]
    values, counts = np.unique(sizes.astype(np.int64), return_counts=True)
    run.table("cells", ["size", "count"], [[int(v), int(c)] for v, c in zip(values, counts)])


def _run_verify_allocation(
    run: Run, system: AnySystem, p: VerifyAllocationParams
) -> None:
    cfg, body = run.cfg, run.body
    assert cfg.budget is not None
    target = _target(system, p.target)
    alloc = _allocation(system, target, p, cfg.budget)
    if isinstance(system, FiniteSystem):
        if p.f_indicator is not None:
            raise ArgumentError("f_indicator is for sampled systems, use f")
        rep = verify_allocation_identity(system, target, alloc, p.f)
        body.exact["transported_integral"] = rep.lhs
        body.exact["integral"] = rep.rhs
    else:
        f = _integrand(system, p)
        rep = verify_allocation_identity(system, target, alloc, f, cfg.samples, cfg.seed)
        body.estimated["transported_integral"] = rep.lhs_estimate
        body.estimated["integral"] = rep.rhs_estimate
    body.verdict("allocation_identity", rep.passed)
    if p.histogram:
        _histogram(run, system, alloc, p)


def _run_kac_function(run: Run, fs: FiniteSystem, p: KacFunctionParams) -> None:
    body = run.body
    assert run.cfg.budget is not None
    target = _target(fs, p.target)
    alloc = _allocation(fs, target, p, run.cfg.budget)
    kf = kac_function(fs, target, alloc, universal=p.universal)
    body.exact["kac_function"] = kf
    partition = check_kac_partition(fs, kf)
    body.exact["partition"] = partition
    body.verdict("translates_partition", partition.passed)
    body.verdict("cell_size_integral", partition.integral == 1)
    tail = tail_bound_check(fs, target, kf)
    body.exact["tail_bound"] = tail
    body.verdict("tail_bound", tail.passed)
    run.table(
        "tail",
        ["n", "measure", "bound", "ok"],
        [[r.n, r.measure, r.bound, r.ok] for r in tail.rows],
    )
    if p.f is not None:
        shapes = set(p.shapes) if p.shapes is not None else None
        tr = transport_inequality(fs, kf, p.f, shapes, alloc)
        body.exact["transport"] = tr
        body.verdict("transport", tr.passed)


def _run_voronoi(run: Run, system: Optional[AnySystem], p: VoronoiParams) -> None:
    body = run.body
    if p.hits is not None:
        hs = HittingSet.of(p.hits, p.radius)
    else:
        assert system is not None and p.target is not None and p.point is not None
        target = _target(system, p.target)
        if isinstance(system, FiniteSystem):
            if not isinstance(p.point, int):
                raise ArgumentError("points of finite systems are indices")
            x: Any = p.point
        else:
            if isinstance(p.point, int):
                raise ArgumentError("points of sampled systems are coordinate lists")
            x = np.array([float(Fraction(c)) for c in p.point])
            if len(x) == 1:
                x = x[0]
        assert p.radius is not None
        hs = hitting_set(system, target, x, p.radius)
    body.exact["hitting_set"] = hs
    cells = voronoi_cells(hs)
    body.exact["voronoi"] = cells
    if not cells.bounded:
        raise InconclusiveError(
            "the closed cell is unbounded, the hitting set needs a larger radius",
            cells.recession,
        )
    b = LatticeCell.of(p.cell, hs.dim) if p.cell is not None else greedy_cell(hs)
    body.exact["cell"] = b
    rep = sandwich_check(hs, b)
    body.exact["sandwich"] = rep
    body.verdict("strict_in_cell", rep.strict_in_cell)
    body.verdict("cell_in_closed", rep.cell_in_closed)
    body.verdict("almost_convex", rep.almost_convex)
    if p.svg and hs.dim == 2:
        run.text("svg", cells_svg(hs, cells, b))


def _run_relation(run: Run, system: Optional[AnySystem], p: RelationParams) -> None:
    body = run.body
    if p.classes is not None:
        rel = EquivRelation.from_classes(p.classes, p.masses)
        verdict = validate_relation(rel)
        body.exact["relation"] = verdict
        body.verdict("relation_preserves_measure", verdict.valid)
        if not verdict.valid:
            return
        assert p.tau is not None
        tau = TauMap(table=p.tau)
    else:
        if not isinstance(system, FiniteSystem):
            raise ArgumentError("orbit relations need a finite system")
        rel = orbit_relation(system)
        if p.first_return is not None:
            tau = first_return_tau(system, p.first_return)
        else:
            assert p.tau is not None
            tau = TauMap(table=p.tau)
    body.exact["tau"] = tau.table
    kac = verify_relation_kac(rel, tau, p.f)
    body.exact["relation_kac"] = kac
    body.verdict("relation_kac", kac.passed)
    push = pushforward_preserved(rel, tau)
    body.exact["pushforward"] = push
    body.verdict("pushforward", push.passed)
    if isinstance(system, FiniteSystem):
        bridge = check_bridge(system, tau, p.f)
        body.exact["bridge"] = bridge
        body.verdict("bridge", bridge.passed)


def _run_generator(run: Run, system: AnySystem, p: GeneratorParams) -> None:
    body = run.body
    assert run.cfg.budget is not None
    census = finite_orbit_census(system)
    body.exact["census"] = census
    targets = p.targets
    if p.epsilon is not None:
        partition = sweep_out_partition(system, p.epsilon, p.n_max)
        body.exact["sweep_out_partition"] = partition
        body.verdict(
            "pieces_within_epsilon",
            all(piece.measure <= partition.epsilon for piece in partition.pieces),
        )
        if not targets and isinstance(system, FiniteSystem):
            targets = [sorted(piece.points or ()) for piece in partition.pieces]
    if not p.sets:
        return
    if not isinstance(system, FiniteSystem):
        raise ArgumentError("fingerprints are computed on finite systems")
    if len(p.sets) != len(targets):
        raise ArgumentError(f"{len(p.sets)} sets for {len(targets)} targets")
    allocations = [
        greedy_allocation(system, system.point_set(a), budget=run.cfg.budget)
        for a in targets
    ]
    gp = generator_partition(system, allocations, p.sets)
    body.exact["generator_partition"] = gp
    reports = [
        reconstruct_and_verify(system, gp, allocations, p.sets, n)
        for n in range(1, len(p.sets) + 1)
    ]
    body.exact["reconstruction"] = reports
    body.verdict("reconstruction", all(r.passed for r in reports))


def _run_census(run: Run, system: AnySystem, p: CensusParams) -> None:
    census = finite_orbit_census(system)
    run.body.exact["census"] = census


def run_experiment(
    cfg: ExperimentConfig, out_dir: Optional[Path] = None, command: str = "kacbench"
) -> Tuple[ExitCode, Report]:
    """
    Run an experiment and write its report (and tables or diagrams) into `out_dir`.

    Returns the exit code and the report. Runs that run out of budget, or whose
    cells cannot be certified, abstain.
    """
    cfg = cfg.effective()
    log.info(f"Running {cfg.command.value} experiment '{cfg.stem}' (seed {cfg.seed})")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    run = Run(cfg, out_dir)
    system = cfg.build_system()
    p: Any = cfg.params
    try:
        if cfg.command == Command.VERIFY_KAC:
            _run_verify_kac(run, system, p)
        elif cfg.command == Command.VERIFY_ALLOCATION:
            _run_verify_allocation(run, system, p)
        elif cfg.command == Command.KAC_FUNCTION:
            _run_kac_function(run, system, p)
        elif cfg.command == Command.VORONOI_CELLS:
            _run_voronoi(run, system, p)
        elif cfg.command == Command.RELATION_CHECK:
            _run_relation(run, system, p)
        elif cfg.command == Command.GENERATOR_DEMO:
            _run_generator(run, system, p)
        else:
            _run_census(run, system, p)
    except (AbstentionError, InconclusiveError) as err:
        log.error(f"Abstaining: {err}")
        run.body.status = Status.ABSTAIN
        run.body.message = str(err)
    run.body.finish()

    report = Report(header=ReportHeader.now(command), body=run.body)
    if out_dir is not None:
        save_json(report, out_dir / f"{cfg.stem}.json")
    log.info(f"Experiment '{cfg.stem}' finished: {run.body.status.value}")
    return run.body.status.exit_code, report

import math
from dataclasses import dataclass
from typing import Optional, List, Dict, Any, Tuple, Callable

from numerics.models import Mesh2D, ProblemSpec, SourceSpec
from numerics.kernels.grid import uniform_mesh2d, shishkin_mesh2d

ALL_METHODS: Tuple[str, ...] = ("galerkin", "upwind", "supg", "cip", "lps", "afc", "adsc")
KNOWN_METHODS = frozenset(ALL_METHODS + ("adsc-fixed-ref",))

MAIN_EPS = 2e-3
MAIN_BETA = (1.0 / math.sqrt(1.36), 0.6 / math.sqrt(1.36))
NIST_BETA = (0.5, math.sqrt(3.0) / 2.0)
REFINEMENT_LEVELS = (30, 45, 60, 90, 120)


@dataclass(frozen=True)
class MeshSpec:
    kind: str
    Ne: int
    dim: int = 2

    def __post_init__(self):
        if self.kind not in ("uniform", "shishkin"):
            raise ValueError(f"Unknown mesh kind '{self.kind}'")

    def build(self, eps: float) -> Mesh2D:
        if self.kind == "shishkin":
            return shishkin_mesh2d(self.Ne, eps, dim=self.dim)
        return uniform_mesh2d(self.Ne, dim=self.dim)


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str
    n_ref: Optional[int] = None
    check_n_ref: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("fine_grid", "exact_formula"):
            raise ValueError(f"Unknown reference kind '{self.kind}'")


@dataclass(frozen=True)
class ScenarioCase:
    label: str
    mesh: MeshSpec
    problem: ProblemSpec


@dataclass(frozen=True)
class Scenario:
    """A named experiment: cases x methods, plus an optional study.

    study is one of standard, few_shot, sensitivity, fixed_reference.
    parameter_grid entries are (label, overrides) pairs applied on top of
    the active settings for sensitivity studies.
    """
    name: str
    title: str
    cases: Tuple[ScenarioCase, ...]
    methods: Tuple[str, ...]
    reference: ReferenceSpec
    study: str = "standard"
    compute_rates: bool = False
    modal_table: bool = False
    caps: Tuple[int, ...] = ()
    parameter_grid: Tuple[Tuple[str, Dict[str, Any]], ...] = ()

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in KNOWN_METHODS]
        if unknown:
            raise ValueError(f"Scenario {self.name} lists unknown methods {unknown}")
        if self.study not in ("standard", "few_shot", "sensitivity", "fixed_reference"):
            raise ValueError(f"Unknown study '{self.study}'")
        if self.reference.kind == "exact_formula":
            missing = [c.label for c in self.cases if not c.problem.has_exact_solution]
            if missing:
                raise ValueError(f"Scenario {self.name}: cases {missing} have no exact solution")


def main_problem(beta: Tuple[float, ...] = MAIN_BETA, source: Optional[SourceSpec] = None) -> ProblemSpec:
    return ProblemSpec(MAIN_EPS, beta, source or SourceSpec.gaussian((0.5, 0.5), sigma=0.07))


def _levels(problem: ProblemSpec, levels, kind: str = "uniform") -> Tuple[ScenarioCase, ...]:
    return tuple(ScenarioCase(f"Ne={Ne}", MeshSpec(kind, Ne), problem) for Ne in levels)


def _main2d() -> Scenario:
    return Scenario(
        name="main2d",
        title="Two-dimensional directional convection test",
        cases=_levels(main_problem(), (45,)),
        methods=ALL_METHODS,
        reference=ReferenceSpec("fine_grid", check_n_ref=360),
    )


def _refinement() -> Scenario:
    return Scenario(
        name="refinement",
        title="Mesh refinement of the main test with modal-balance diagnostics",
        cases=_levels(main_problem(), REFINEMENT_LEVELS),
        methods=("galerkin", "supg", "adsc"),
        reference=ReferenceSpec("fine_grid"),
        compute_rates=True,
        modal_table=True,
    )


def _inactive() -> Scenario:
    problem = ProblemSpec(1.0, MAIN_BETA, SourceSpec.manufactured_sine())
    return Scenario(
        name="inactive",
        title="Manufactured solution, inactive regime (eps=1)",
        cases=_levels(problem, (20, 40, 80, 160)),
        methods=("galerkin", "adsc"),
        reference=ReferenceSpec("exact_formula"),
        compute_rates=True,
    )


def _active() -> Scenario:
    problem = ProblemSpec(MAIN_EPS, MAIN_BETA, SourceSpec.manufactured_sine())
    return Scenario(
        name="active",
        title="Manufactured solution, active regime (eps=2e-3)",
        cases=_levels(problem, REFINEMENT_LEVELS),
        methods=("galerkin", "adsc"),
        reference=ReferenceSpec("exact_formula"),
        compute_rates=True,
    )


def _nist_uniform(eps: float, name: str) -> Scenario:
    problem = ProblemSpec(eps, NIST_BETA, SourceSpec.nist_layer())
    return Scenario(
        name=name,
        title=f"Exponential boundary layers on uniform meshes (eps={eps:g})",
        cases=_levels(problem, REFINEMENT_LEVELS),
        methods=("galerkin", "upwind", "supg", "adsc"),
        reference=ReferenceSpec("exact_formula"),
        compute_rates=True,
    )


def _nist_shishkin() -> Scenario:
    problem = ProblemSpec(1e-2, NIST_BETA, SourceSpec.nist_layer())
    return Scenario(
        name="nist-shishkin-2",
        title="Exponential boundary layers on Shishkin meshes (eps=1e-2)",
        cases=_levels(problem, (30, 60, 90, 120), kind="shishkin"),
        methods=("galerkin", "upwind", "supg", "adsc"),
        reference=ReferenceSpec("exact_formula"),
        compute_rates=True,
    )


def _eps_sweep() -> Scenario:
    cases = tuple(
        ScenarioCase(f"eps={eps:.0e}", MeshSpec("uniform", 64),
                     ProblemSpec(eps, NIST_BETA, SourceSpec.nist_layer()))
        for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5))
    return Scenario(
        name="eps-sweep",
        title="Small-diffusion sweep on the exponential-layer problem, Ne=64",
        cases=cases,
        methods=("galerkin", "upwind", "supg", "adsc"),
        reference=ReferenceSpec("exact_formula"),
    )


def _few_shot() -> Scenario:
    return Scenario(
        name="few-shot",
        title="Few-shot ADSC over the mesh-refinement family",
        cases=_levels(main_problem(), REFINEMENT_LEVELS),
        methods=("adsc",),
        reference=ReferenceSpec("fine_grid"),
        study="few_shot",
        caps=(5, 10, 1000),
    )


def _direction() -> Scenario:
    directions = {
        "beta=(1,0)": (1.0, 0.0),
        "beta=(1,1)/sqrt2": (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
        "beta=(2,1)/sqrt5": (2.0 / math.sqrt(5.0), 1.0 / math.sqrt(5.0)),
    }
    cases = tuple(ScenarioCase(label, MeshSpec("uniform", 45), main_problem(beta))
                  for label, beta in directions.items())
    return Scenario(
        name="direction",
        title="Sensitivity with respect to the convection direction",
        cases=cases,
        methods=ALL_METHODS,
        reference=ReferenceSpec("fine_grid"),
    )


def _rhs() -> Scenario:
    sources = {
        "centered": SourceSpec.gaussian((0.5, 0.5), sigma=0.07),
        "narrow": SourceSpec.gaussian((0.5, 0.5), sigma=0.035),
        "double": SourceSpec.double_gaussian((0.35, 0.35), (0.65, 0.65), sigma=0.07),
    }
    cases = tuple(ScenarioCase(label, MeshSpec("uniform", 45), main_problem(source=source))
                  for label, source in sources.items())
    return Scenario(
        name="rhs",
        title="Sensitivity with respect to the right-hand side",
        cases=cases,
        methods=ALL_METHODS,
        reference=ReferenceSpec("fine_grid"),
    )


def _sensitivity() -> Scenario:
    grid: List[Tuple[str, Dict[str, Any]]] = []
    for gmin, gmax, kappa in ((0.08, 0.25, 2.0), (0.10, 0.30, 1.5), (0.10, 0.30, 2.0), (0.12, 0.35, 2.0)):
        grid.append((f"bounds=({gmin:g},{gmax:g},{kappa:g})",
                     {"gamma_min": gmin, "gamma_max": gmax, "kappa": kappa}))
    for omega in (0.20, 0.35, 0.50, 0.75, 1.00):
        grid.append((f"omega={omega:.2f}", {"omega": omega}))
    for start in ("zero", "coarse", "galerkin", "upwind"):
        grid.append((f"start={start}", {"warm_start": start}))
    return Scenario(
        name="sensitivity",
        title="Sensitivity to parameter bounds, relaxation and initialization",
        cases=_levels(main_problem(), (45,)),
        methods=("adsc",),
        reference=ReferenceSpec("fine_grid"),
        study="sensitivity",
        parameter_grid=tuple(grid),
    )


def _iterations() -> Scenario:
    grid = tuple((f"max_iter={cap}", {"max_iterations": cap}) for cap in (100, 300, 500, 1000))
    return Scenario(
        name="iterations",
        title="Sensitivity to the maximum number of activation updates",
        cases=_levels(main_problem(), (45,)),
        methods=("adsc",),
        reference=ReferenceSpec("fine_grid"),
        study="sensitivity",
        parameter_grid=grid,
    )


def _fixed_reference() -> Scenario:
    return Scenario(
        name="fixed-ref",
        title="Fixed-reference activation against the coupled iteration",
        cases=_levels(main_problem(), (45,)),
        methods=("galerkin", "adsc-fixed-ref", "adsc"),
        reference=ReferenceSpec("fine_grid"),
        study="fixed_reference",
    )


def _one_dimensional() -> Scenario:
    problem = ProblemSpec(1e-3, (1.0,), SourceSpec.gaussian((0.5,), sigma=0.05))
    return Scenario(
        name="1d",
        title="Reduced one-dimensional benchmark",
        cases=(ScenarioCase("Ne=80", MeshSpec("uniform", 80, dim=1), problem),),
        methods=("galerkin", "upwind", "supg", "adsc"),
        reference=ReferenceSpec("fine_grid", n_ref=1280),
    )


_REGISTRY: Dict[str, Callable[[], Scenario]] = {
    "main2d": _main2d,
    "refinement": _refinement,
    "inactive": _inactive,
    "active": _active,
    "nist-uniform-2": lambda: _nist_uniform(1e-2, "nist-uniform-2"),
    "nist-uniform-3": lambda: _nist_uniform(1e-3, "nist-uniform-3"),
    "nist-shishkin-2": _nist_shishkin,
    "eps-sweep": _eps_sweep,
    "few-shot": _few_shot,
    "direction": _direction,
    "rhs": _rhs,
    "sensitivity": _sensitivity,
    "iterations": _iterations,
    "fixed-ref": _fixed_reference,
    "1d": _one_dimensional,
}


def list_scenarios() -> List[str]:
    return list(_REGISTRY)


def get_scenario(name: str) -> Scenario:
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"Unknown scenario '{name}'. Known: {', '.join(_REGISTRY)}")
    return builder()

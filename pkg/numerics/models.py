from dataclasses import dataclass, field
from typing import Optional, List, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Ascending node set on [0, 1] including both endpoints."""
    nodes: np.ndarray
    kind: str = "uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("A mesh needs at least two intervals")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError(
                f"Mesh nodes must start at 0 and end at 1, got {nodes[0]} and {nodes[-1]}")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("Mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def Ne(self) -> int:
        return self.nodes.size - 1

    @property
    def n_interior(self) -> int:
        return self.nodes.size - 2

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def h_max(self) -> float:
        return float(self.steps.max())

    @property
    def is_uniform(self) -> bool:
        steps = self.steps
        return bool(np.all(np.abs(steps - 1.0 / self.Ne) <= 1e-14))

    @property
    def cell_widths(self) -> np.ndarray:
        """Dual-cell width (h_{i-1} + h_i)/2 of every interior node."""
        steps = self.steps
        return 0.5 * (steps[:-1] + steps[1:])


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Tensor-product mesh; y is None for the reduced one-dimensional problem.

    Interior unknowns are ordered row-major with the x index fastest, so a
    value vector reshapes to ``shape`` = (Ny, Nx).
    """
    x: Mesh1D
    y: Optional[Mesh1D] = None

    @property
    def dim(self) -> int:
        return 1 if self.y is None else 2

    @property
    def axes(self) -> Tuple[Mesh1D, ...]:
        return (self.x,) if self.y is None else (self.x, self.y)

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.y is None:
            return (self.x.n_interior,)
        return (self.y.n_interior, self.x.n_interior)

    @property
    def n_interior(self) -> int:
        return int(np.prod(self.shape))

    @property
    def Ne(self) -> int:
        return max(axis.Ne for axis in self.axes)

    @property
    def h(self) -> float:
        return max(axis.h_max for axis in self.axes)

    @property
    def is_uniform(self) -> bool:
        return all(axis.is_uniform for axis in self.axes)

    @property
    def kind(self) -> str:
        kinds = {axis.kind for axis in self.axes}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Interior coordinates as arrays of ``shape``, ordered (x, y)."""
        if self.y is None:
            return (self.x.interior_nodes.copy(),)
        X, Y = np.meshgrid(self.x.interior_nodes, self.y.interior_nodes, indexing="xy")
        return (X, Y)

    def cell_areas(self) -> np.ndarray:
        if self.y is None:
            return self.x.cell_widths.copy()
        return np.outer(self.y.cell_widths, self.x.cell_widths)


@dataclass(frozen=True, eq=False)
class GridFunction:
    mesh: Mesh2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.mesh.n_interior:
            raise ValueError(
                f"Grid function has {values.size} values, mesh has {self.mesh.n_interior} interior nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("Grid function contains non-finite values")
        object.__setattr__(self, "values", values)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.mesh.shape)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.mesh, values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.mesh, self.values - other.values)


@dataclass(frozen=True)
class DiagnosticsRow:
    l2_error: float
    linf_error: float
    tv: float
    e_ext: float
    detector_count: int
    # nan when not computed (non-uniform meshes)
    rho_stab_mean: float = float("nan")
    undershoot: float = 0.0
    overshoot: float = 0.0


@dataclass(frozen=True)
class SolveReport:
    residual_norm: float
    method: str = "direct"
    iterations: int = 0


@dataclass(frozen=True)
class SourceSpec:
    """Right-hand side descriptor.

    kind is one of gaussian, double_gaussian, manufactured_sine, nist_layer.
    Gaussian kinds sum unit-shaped bumps exp(-|x - c|^2 / (2 sigma^2)).
    """
    kind: str
    centers: Tuple[Tuple[float, ...], ...] = ()
    sigma: float = 0.07
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "double_gaussian", "manufactured_sine", "nist_layer"):
            raise ValueError(f"Unknown source kind '{self.kind}'")
        if self.kind in ("gaussian", "double_gaussian"):
            if self.sigma <= 0.0:
                raise ValueError("Gaussian width sigma must be positive")
            if not self.centers:
                raise ValueError("Gaussian sources need at least one center")

    @classmethod
    def gaussian(cls, center: Tuple[float, ...], sigma: float = 0.07, amplitude: float = 1.0) -> "SourceSpec":
        return cls("gaussian", (tuple(center),), sigma, amplitude)

    @classmethod
    def double_gaussian(cls, first: Tuple[float, ...], second: Tuple[float, ...],
                        sigma: float = 0.07, amplitude: float = 1.0) -> "SourceSpec":
        return cls("double_gaussian", (tuple(first), tuple(second)), sigma, amplitude)

    @classmethod
    def manufactured_sine(cls) -> "SourceSpec":
        return cls("manufactured_sine")

    @classmethod
    def nist_layer(cls) -> "SourceSpec":
        return cls("nist_layer")

    @property
    def has_exact_solution(self) -> bool:
        return self.kind in ("manufactured_sine", "nist_layer")


@dataclass(frozen=True)
class ProblemSpec:
    eps: float
    beta: Tuple[float, ...]
    source: SourceSpec

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError(f"Diffusion eps must be positive, got {self.eps}")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))

    @property
    def beta_norm(self) -> float:
        return float(np.hypot(*self.beta)) if len(self.beta) > 1 else abs(self.beta[0])

    @property
    def has_exact_solution(self) -> bool:
        return self.source.has_exact_solution

    def peclet(self, h: float) -> float:
        return self.beta_norm * h / (2.0 * self.eps)


@dataclass(frozen=True)
class Symbol:
    a: np.ndarray
    b: np.ndarray

    @property
    def modulus(self) -> np.ndarray:
        return np.hypot(self.a, self.b)


@dataclass(frozen=True, eq=False)
class ModalSet:
    """Sine-mode quantities on the interior index grid, arrays shaped like the mesh."""
    Ne: int
    eps: float
    beta: Tuple[float, ...]
    h: float
    thetas: Tuple[np.ndarray, ...]
    a: np.ndarray
    b: np.ndarray
    rho: np.ndarray
    dominant_mask: np.ndarray
    mean_rho_gal: float
    B: np.ndarray
    B_mean: float

    @property
    def dominant_count(self) -> int:
        return int(self.dominant_mask.sum())

    @property
    def mode_count(self) -> int:
        return int(self.rho.size)

    @property
    def peclet(self) -> float:
        return float(np.linalg.norm(self.beta)) * self.h / (2.0 * self.eps)


@dataclass(frozen=True)
class AdscParams:
    gamma_min: float = 0.08
    gamma_max: float = 0.25
    kappa: float = 2.0
    omega: float = 0.35
    delta_h: float = 1e-12
    eta_det: float = 5e-2
    activation_tol: float = 1e-8
    max_iterations: int = 1000
    few_shot_cap: Optional[int] = None
    detector_kind: str = "regularized"
    transfer_kind: str = "averaged"
    warm_start: str = "galerkin"
    boundary_transfer: str = "adjacent"

    def __post_init__(self):
        if not 0.0 <= self.gamma_min <= self.gamma_max:
            raise ValueError(
                f"Need 0 <= gamma_min <= gamma_max, got ({self.gamma_min}, {self.gamma_max})")
        if self.kappa < 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")
        if self.delta_h <= 0.0 or self.eta_det <= 0.0:
            raise ValueError("delta_h and eta_det must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.few_shot_cap is not None and self.few_shot_cap < 1:
            raise ValueError("few_shot_cap must be positive when set")
        if self.detector_kind not in ("regularized", "sharp"):
            raise ValueError(f"Unknown detector kind '{self.detector_kind}'")
        if self.transfer_kind not in ("averaged", "max"):
            raise ValueError(f"Unknown transfer kind '{self.transfer_kind}'")
        if self.warm_start not in ("galerkin", "zero", "coarse", "upwind"):
            raise ValueError(f"Unknown warm start '{self.warm_start}'")
        if self.boundary_transfer not in ("adjacent", "zero"):
            raise ValueError(f"Unknown boundary transfer '{self.boundary_transfer}'")

    @property
    def iteration_limit(self) -> int:
        if self.few_shot_cap is None:
            return self.max_iterations
        return min(self.few_shot_cap, self.max_iterations)


@dataclass(frozen=True, eq=False)
class ActivationField:
    """Nodal activation plus its edge transfer, one edge array per axis.

    Edge arrays follow the row layout of the matching edge-difference
    operator: x-edges are (Ny, Nex), y-edges are (Ney, Nx), flattened.
    """
    chi: np.ndarray
    edges: Tuple[np.ndarray, ...]

    @property
    def chi_x(self) -> np.ndarray:
        return self.edges[0]

    @property
    def chi_y(self) -> Optional[np.ndarray]:
        return self.edges[1] if len(self.edges) > 1 else None

    @property
    def mass(self) -> float:
        return float(self.chi.sum())

    def active_count(self, threshold: float = 1e-3) -> int:
        return int(np.count_nonzero(self.chi > threshold))


@dataclass
class AdscResult:
    solution: GridFunction
    activation: ActivationField
    iterations_used: int
    final_variation: float
    activation_mass: float
    active_node_count: int
    solve_report: SolveReport
    stationary: bool = True
    stabilization: Optional[object] = None
    variation_history: List[float] = field(default_factory=list)
    mass_history: List[float] = field(default_factory=list)
    activation_history: List[np.ndarray] = field(default_factory=list, repr=False)

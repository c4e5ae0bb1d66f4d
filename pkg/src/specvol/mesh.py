"""1D interval meshes and 2D structured rectangular meshes.

Each cell carries the subdivision geometry of its rule: the physical
subdivision points are x_{i,j} = x_i + (h_i/2) xi_j.  2D meshes are uniform
tensor grids whose control volumes are tensor products of the 1D control
volumes, one per tensor basis function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SubdivisionRule
from .errors import InvalidMesh

_QUASI_UNIFORM_MAX_RATIO = 10.0


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Interval mesh with per-cell subdivision geometry."""

    a: float
    b: float
    edges: np.ndarray
    rule: SubdivisionRule

    def __post_init__(self):
        if not np.all(np.diff(self.edges) > 0):
            raise InvalidMesh("cell edges must be strictly increasing")
        ratio = self.h.max() / self.h.min()
        if ratio > _QUASI_UNIFORM_MAX_RATIO:
            raise InvalidMesh(f"quasi-uniformity ratio {ratio:.2f} exceeds 10")

    @property
    def n_cells(self) -> int:
        return len(self.edges) - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def subdivision_points(self) -> np.ndarray:
        """Physical subdivision points, shape (n_cells, k+2), endpoints included."""
        return self.centers[:, None] + 0.5 * self.h[:, None] * self.rule.nodes

    def physical_points(self, ref_points: np.ndarray) -> np.ndarray:
        """Map reference points to every cell, shape (n_cells, len(ref_points))."""
        ref_points = np.asarray(ref_points)
        return self.centers[:, None] + 0.5 * self.h[:, None] * ref_points


def build_mesh_1d(
    a: float,
    b: float,
    n_cells: int,
    rule: SubdivisionRule,
    perturbation: float = 0.0,
    seed: int = 0,
) -> Mesh1D:
    """Uniform mesh of [a, b], optionally with randomly perturbed interior edges.

    Interior edges move by at most perturbation * h/2 (perturbation in
    [0, 0.3], seeded), which keeps the mesh quasi-uniform.
    """
    if not a < b:
        raise InvalidMesh(f"need a < b, got [{a}, {b}]")
    if n_cells < 2:
        raise InvalidMesh("need at least 2 cells")
    if not 0.0 <= perturbation <= 0.3:
        raise InvalidMesh("perturbation must lie in [0, 0.3]")
    edges = np.linspace(a, b, n_cells + 1)
    if perturbation > 0.0:
        h = (b - a) / n_cells
        rng = np.random.default_rng(seed)
        shift = rng.uniform(-1.0, 1.0, n_cells - 1) * perturbation * h / 2.0
        edges[1:-1] += shift
        if not np.all(np.diff(edges) > 0):
            raise InvalidMesh("perturbation produced non-increasing edges")
    return Mesh1D(a=a, b=b, edges=edges, rule=rule)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Uniform tensor grid on a rectangle; one rule shared by both directions."""

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    rule: SubdivisionRule
    walls: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InvalidMesh("need at least 2 cells per direction")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidMesh("degenerate rectangle")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def x_edges(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx + 1)

    @property
    def y_edges(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny + 1)

    @property
    def x_centers(self) -> np.ndarray:
        return self.x0 + self.hx * (np.arange(self.nx) + 0.5)

    @property
    def y_centers(self) -> np.ndarray:
        return self.y0 + self.hy * (np.arange(self.ny) + 0.5)

    def physical_x(self, ref_points) -> np.ndarray:
        return self.x_centers[:, None] + 0.5 * self.hx * np.asarray(ref_points)

    def physical_y(self, ref_points) -> np.ndarray:
        return self.y_centers[:, None] + 0.5 * self.hy * np.asarray(ref_points)


@dataclass(frozen=True)
class InternalWall:
    """Reflective wall along a mesh line inside the domain.

    axis 'y' places the wall on the horizontal edge y = y_edges[edge_index]
    spanning cells lo..hi-1 in x (both sides see a slip wall); axis 'x' is
    the transposed arrangement.
    """

    axis: str
    edge_index: int
    lo: int
    hi: int


def build_mesh_2d(
    rect: tuple,
    nx: int,
    ny: int,
    rule: SubdivisionRule,
    walls: tuple = (),
) -> Mesh2D:
    """Uniform tensor mesh of the rectangle (x0, x1, y0, y1)."""
    x0, x1, y0, y1 = rect
    return Mesh2D(x0=x0, x1=x1, y0=y0, y1=y1, nx=nx, ny=ny, rule=rule, walls=tuple(walls))

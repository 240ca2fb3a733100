"""Structured triangulations of the unit square and the coarse observation grid.

The fine mesh splits every cell of an N x N grid along its SW-NE diagonal,
giving 2N^2 congruent right triangles of area h^2/2 with h = 1/N.  The coarse
observation grid partitions the same square into (N/k)^2 axis-aligned cells of
width H = k*h, each covering exactly 2k^2 fine triangles.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, OutOfDomainError


@dataclass(frozen=True, eq=False)
class FineMesh:
    N: int
    h: float
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3) vertex indices, positively oriented
    boundary_vertex_flags: np.ndarray  # (nv,) bool

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True, eq=False)
class CoarseGrid:
    k: int
    H: float
    n_cells_per_side: int
    cell_to_fine_triangles: np.ndarray  # (nc, 2k^2) triangle indices
    coarse_vertices: np.ndarray         # ((N/k+1)^2, 2)
    mesh: FineMesh

    @property
    def n_cells(self) -> int:
        return self.n_cells_per_side ** 2


def build_fine_mesh(N: int) -> FineMesh:
    """Structured triangulation of [0,1]^2 with SW-NE diagonals.

    Vertices are numbered row-major (x fastest), triangles cell-major with the
    lower-right triangle of each cell first.
    """
    if N < 2:
        raise InvalidConfigError(f"need at least 2 subdivisions per side, got N={N}")
    h = 1.0 / N
    side = np.linspace(0.0, 1.0, N + 1)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    # vertex index of lattice point (i, j): j*(N+1) + i
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    i = i.ravel()
    j = j.ravel()
    v00 = j * (N + 1) + i
    v10 = v00 + 1
    v01 = v00 + (N + 1)
    v11 = v01 + 1
    # SW-NE diagonal: lower-right triangle (v00, v10, v11), upper-left (v00, v11, v01)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * N * N, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    on_edge = np.isin(vertices[:, 0], (0.0, 1.0)) | np.isin(vertices[:, 1], (0.0, 1.0))
    return FineMesh(N=N, h=h, vertices=vertices, triangles=triangles,
                    boundary_vertex_flags=on_edge)


def build_coarse_grid(mesh: FineMesh, k: int) -> CoarseGrid:
    """Group the fine triangles of `mesh` into (N/k)^2 square observation cells."""
    N = mesh.N
    if k < 1 or N % k != 0:
        raise InvalidConfigError(f"coarsening ratio k={k} must divide N={mesh.N}")
    nc_side = N // k
    H = k * mesh.h

    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    cx = np.minimum((centroids[:, 0] // H).astype(np.int64), nc_side - 1)
    cy = np.minimum((centroids[:, 1] // H).astype(np.int64), nc_side - 1)
    cell_of_tri = cy * nc_side + cx

    order = np.argsort(cell_of_tri, kind="stable")
    cell_to_fine = order.reshape(nc_side * nc_side, 2 * k * k)

    side = np.linspace(0.0, 1.0, nc_side + 1)
    gx, gy = np.meshgrid(side, side, indexing="xy")
    coarse_vertices = np.column_stack([gx.ravel(), gy.ravel()])

    return CoarseGrid(k=k, H=H, n_cells_per_side=nc_side,
                      cell_to_fine_triangles=cell_to_fine,
                      coarse_vertices=coarse_vertices, mesh=mesh)


def locate_cell(grid: CoarseGrid, point) -> int:
    """Index of the coarse cell containing `point`.

    Points on shared edges resolve by the floor convention, clamped at the top
    boundary so (1, 1) belongs to the top-right cell.
    """
    x, y = float(point[0]), float(point[1])
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise OutOfDomainError(f"point ({x}, {y}) outside [0,1]^2")
    n = grid.n_cells_per_side
    cx = min(int(x // grid.H), n - 1)
    cy = min(int(y // grid.H), n - 1)
    return cy * n + cx

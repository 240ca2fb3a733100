"""Coarse observation operators and empirical estimates of their constants.

Two realizations of the coarse-scale map: per-cell averaging (the L2
projection onto cellwise constants) and nodal interpolation onto continuous
piecewise linears on the coarse grid (each coarse square split SW-NE, like
the fine mesh, so reconstructions are piecewise polynomial on fine
triangles and all norms below are computed exactly by quadrature).
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from . import assembly, fem
from .errors import InvalidConfigError
from .mesh import CoarseGrid


class InterpolantKind(str, Enum):
    PiecewiseConstantAverage = "pc"
    CoarseLagrangeP1 = "lagrange"


def _kind_value(kind) -> str:
    if isinstance(kind, InterpolantKind):
        return kind.value
    if kind in ("pc", "lagrange"):
        return kind
    raise InvalidConfigError(f"unknown interpolant kind {kind!r}")


@lru_cache(maxsize=32)
def _dofmap_for(mesh):
    return fem.build_dofmap(mesh)


@lru_cache(maxsize=32)
def _nudging_for(dofmap, grid, kind: str):
    return assembly.build_nudging(dofmap, grid, kind)


def interpolate_p2_velocity(dofmap, u_fn, t: float = 0.0) -> np.ndarray:
    """Nodal P2 interpolant of a velocity function u_fn(x, y, t) -> (u1, u2)."""
    x = dofmap.p2_coords[:, 0]
    y = dofmap.p2_coords[:, 1]
    u1, u2 = u_fn(x, y, t)
    return np.concatenate([np.broadcast_to(u1, x.shape),
                           np.broadcast_to(u2, x.shape)]).astype(float)


def apply_interpolant(kind, grid: CoarseGrid, field: np.ndarray) -> np.ndarray:
    """Coarse representation of a P2 velocity field.

    Returns (nc, 2) cell averages for the averaging kind, or (n_coarse_nodes,
    2) nodal values for the Lagrange kind.
    """
    kv = _kind_value(kind)
    dofmap = _dofmap_for(grid.mesh)
    if field.shape != (dofmap.n_velocity,):
        raise InvalidConfigError(
            f"field has size {field.shape}, expected ({dofmap.n_velocity},)")
    nud = _nudging_for(dofmap, grid, kv)
    n = dofmap.n_p2
    return np.column_stack([nud.E @ field[:n], nud.E @ field[n:]])


def observe_exact(kind, grid: CoarseGrid, u_fn, t: float,
                  degree: int = 8) -> np.ndarray:
    """Coarse representation of a continuous velocity field: exact nodal
    values, or cell averages computed with the given quadrature degree."""
    kv = _kind_value(kind)
    if kv == "lagrange":
        x = grid.coarse_vertices[:, 0]
        y = grid.coarse_vertices[:, 1]
        u1, u2 = u_fn(x, y, t)
        return np.column_stack([np.broadcast_to(u1, x.shape),
                                np.broadcast_to(u2, x.shape)])
    dofmap = _dofmap_for(grid.mesh)
    rule = fem.quadrature_rule(degree)
    tab = assembly.element_tables(dofmap, rule)
    x = tab.xq[:, :, 0]
    y = tab.xq[:, :, 1]
    u1, u2 = u_fn(x, y, t)
    # integral over each fine triangle, then sum per cell
    int1 = np.einsum("q,eq,e->e", tab.weights, np.broadcast_to(u1, x.shape), tab.det)
    int2 = np.einsum("q,eq,e->e", tab.weights, np.broadcast_to(u2, x.shape), tab.det)
    area = grid.H ** 2
    c2f = grid.cell_to_fine_triangles
    return np.column_stack([int1[c2f].sum(axis=1) / area,
                            int2[c2f].sum(axis=1) / area])


def coarse_gram_norm(kind, grid: CoarseGrid, coarse_vals: np.ndarray) -> float:
    """L2 norm of the reconstructed coarse field with the given coarse values."""
    kv = _kind_value(kind)
    dofmap = _dofmap_for(grid.mesh)
    nud = _nudging_for(dofmap, grid, kv)
    total = 0.0
    for comp in range(2):
        d = coarse_vals[:, comp]
        total += float(d @ (nud.W @ d))
    return np.sqrt(total)


def _cell_of_triangles(grid: CoarseGrid) -> np.ndarray:
    nt = grid.mesh.n_triangles
    cell = np.empty(nt, dtype=np.int64)
    for c, tris in enumerate(grid.cell_to_fine_triangles):
        cell[tris] = c
    return cell


def reconstruct_at_quadrature(kind, grid: CoarseGrid, coarse_vals: np.ndarray,
                              tab) -> np.ndarray:
    """Evaluate the coarse interpolant at the tabulated quadrature points.

    Returns (nt, nq, 2).
    """
    kv = _kind_value(kind)
    cell = _cell_of_triangles(grid)
    nk = grid.n_cells_per_side
    if kv == "pc":
        vals = coarse_vals[cell]                       # (nt, 2)
        nq = tab.xq.shape[1]
        return np.repeat(vals[:, None, :], nq, axis=1)
    # coarse P1 on SW-NE-split squares, evaluated cellwise
    cx = cell % nk
    cy = cell // nk
    xi = (tab.xq[:, :, 0] - cx[:, None] * grid.H) / grid.H
    eta = (tab.xq[:, :, 1] - cy[:, None] * grid.H) / grid.H
    i00 = cy * (nk + 1) + cx
    v00 = coarse_vals[i00]            # (nt, 2)
    v10 = coarse_vals[i00 + 1]
    v01 = coarse_vals[i00 + nk + 1]
    v11 = coarse_vals[i00 + nk + 2]
    lower = (v00[:, None, :] + (v10 - v00)[:, None, :] * xi[:, :, None]
             + (v11 - v10)[:, None, :] * eta[:, :, None])
    upper = (v00[:, None, :] + (v11 - v01)[:, None, :] * xi[:, :, None]
             + (v01 - v00)[:, None, :] * eta[:, :, None])
    return np.where((xi >= eta)[:, :, None], lower, upper)


def interpolant_residual_norms(kind, grid: CoarseGrid, field: np.ndarray,
                               degree: int = 5):
    """(|I_H v|_0, |v - I_H v|_0, |grad v|_0) for a P2 field v."""
    dofmap = _dofmap_for(grid.mesh)
    rule = fem.quadrature_rule(degree)
    tab = assembly.element_tables(dofmap, rule)
    n = dofmap.n_p2
    coarse = apply_interpolant(kind, grid, field)
    ih = reconstruct_at_quadrature(kind, grid, coarse, tab)
    vq = np.stack([np.einsum("ei,qi->eq", field[:n][dofmap.tri_p2], tab.v2),
                   np.einsum("ei,qi->eq", field[n:][dofmap.tri_p2], tab.v2)],
                  axis=-1)                                    # (nt, nq, 2)
    gq = np.stack([np.einsum("ei,eqid->eqd", field[:n][dofmap.tri_p2], tab.grad2),
                   np.einsum("ei,eqid->eqd", field[n:][dofmap.tri_p2], tab.grad2)],
                  axis=-1)                                    # (nt, nq, 2, 2)

    def integrate(sq):
        return float(np.einsum("q,eq,e->", tab.weights, sq, tab.det))

    norm_ih = np.sqrt(integrate((ih ** 2).sum(axis=-1)))
    norm_res = np.sqrt(integrate(((vq - ih) ** 2).sum(axis=-1)))
    norm_grad = np.sqrt(integrate((gq ** 2).sum(axis=(-1, -2))))
    return norm_ih, norm_res, norm_grad


@dataclass(frozen=True)
class InterpolantQuality:
    c0_measured: float
    cI_measured: float
    sample_description: str


def default_sample(grid: CoarseGrid, seed: int = 0, n_random: int = 20):
    """Trig fields at four frequencies plus random coefficient vectors."""
    dofmap = _dofmap_for(grid.mesh)
    fields = []
    for m in (1, 2, 3, 4):
        def trig(x, y, t, m=m):
            return (np.sin(m * np.pi * x) * np.sin(m * np.pi * y),
                    np.sin(m * np.pi * y) * np.sin(m * np.pi * x) * (1 - 2 * y))
        fields.append(interpolate_p2_velocity(dofmap, trig))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        fields.append(rng.standard_normal(dofmap.n_velocity))
    return fields


def measure_constants(kind, grid: CoarseGrid, sample) -> InterpolantQuality:
    """Sample-based sup of the stability and approximation ratios."""
    if not sample:
        raise InvalidConfigError("empty sample")
    dofmap = _dofmap_for(grid.mesh)
    rule = fem.quadrature_rule(5)
    tab = assembly.element_tables(dofmap, rule)
    c0 = 0.0
    cI = 0.0
    for field in sample:
        norm_ih, norm_res, norm_grad = interpolant_residual_norms(kind, grid, field)
        n = dofmap.n_p2
        vq = np.stack([np.einsum("ei,qi->eq", field[:n][dofmap.tri_p2], tab.v2),
                       np.einsum("ei,qi->eq", field[n:][dofmap.tri_p2], tab.v2)],
                      axis=-1)
        norm_v = np.sqrt(float(np.einsum("q,eq,e->", tab.weights,
                                         (vq ** 2).sum(axis=-1), tab.det)))
        if norm_v > 0:
            c0 = max(c0, norm_ih / norm_v)
        if norm_grad > 0:
            cI = max(cI, norm_res / (grid.H * norm_grad))
    return InterpolantQuality(c0_measured=c0, cI_measured=cI,
                              sample_description=f"{len(sample)} fields, N={grid.mesh.N}, k={grid.k}")

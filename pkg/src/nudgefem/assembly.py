"""Sparse operator assembly for the nudged Navier-Stokes scheme.

All velocity operators are built from scalar P2 blocks and expanded to the
component-major vector numbering (x-component dofs first).  Matrices come out
as scipy CSR with sorted indices and summed duplicates, so repeated assembly
of the same operator is bitwise reproducible.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import InvalidConfigError
from .fem import DofMap, QuadratureRule, basis_tables
from .mesh import CoarseGrid
from . import fem


@dataclass(frozen=True, eq=False)
class ElementTables:
    """Per-element quadrature data shared by all assembly routines."""
    weights: np.ndarray    # (nq,)
    v2: np.ndarray         # (nq, 6) P2 values
    v1: np.ndarray         # (nq, 3) P1 values
    grad2: np.ndarray      # (nt, nq, 6, 2) physical P2 gradients
    grad1: np.ndarray      # (nt, nq, 3, 2) physical P1 gradients
    xq: np.ndarray         # (nt, nq, 2) physical quadrature points
    det: np.ndarray        # (nt,)


@lru_cache(maxsize=16)
def element_tables(dofmap: DofMap, rule: QuadratureRule) -> ElementTables:
    v2, g2, v1, g1 = basis_tables(rule)
    grad2 = np.einsum("qar,erd->eqad", g2, dofmap.jac_inv)
    grad1 = np.einsum("qar,erd->eqad", g1, dofmap.jac_inv)
    verts0 = dofmap.mesh.vertices[dofmap.mesh.triangles[:, 0]]  # (nt, 2)
    xq = verts0[:, None, :] + np.einsum("qr,edr->eqd", rule.xy, dofmap.jac)
    return ElementTables(weights=rule.weights, v2=v2, v1=v1,
                         grad2=grad2, grad1=grad1, xq=xq, det=dofmap.det_jac)


def _scatter(local: np.ndarray, rows_dof: np.ndarray, cols_dof: np.ndarray,
             shape) -> sp.csr_matrix:
    """Sum (nt, a, b) local blocks into a global CSR matrix."""
    nt, a, b = local.shape
    rows = np.repeat(rows_dof, b, axis=1).ravel()
    cols = np.tile(cols_dof, (1, a)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _block_diag2(block: sp.csr_matrix) -> sp.csr_matrix:
    """Expand a scalar operator to both velocity components."""
    return sp.block_diag([block, block], format="csr")


def _scalar_mass(dofmap: DofMap, rule: QuadratureRule) -> sp.csr_matrix:
    t = element_tables(dofmap, rule)
    # sqrt-weights folded into both factors keep the blocks bitwise symmetric
    vw = t.v2 * np.sqrt(t.weights)[:, None]
    local = np.einsum("qi,qj,e->eij", vw, vw, t.det)
    n = dofmap.n_p2
    return _scatter(local, dofmap.tri_p2, dofmap.tri_p2, (n, n))


def _scalar_stiffness(dofmap: DofMap, rule: QuadratureRule) -> sp.csr_matrix:
    t = element_tables(dofmap, rule)
    gw = t.grad2 * np.sqrt(t.weights)[None, :, None, None]
    local = np.einsum("eqid,eqjd,e->eij", gw, gw, t.det)
    n = dofmap.n_p2
    return _scatter(local, dofmap.tri_p2, dofmap.tri_p2, (n, n))


def assemble_mass(dofmap: DofMap, rule: QuadratureRule) -> sp.csr_matrix:
    """Velocity mass matrix (SPD, block-diagonal over components)."""
    return _block_diag2(_scalar_mass(dofmap, rule))


def assemble_stiffness(dofmap: DofMap, rule: QuadratureRule) -> sp.csr_matrix:
    """Velocity stiffness (grad, grad), viscosity-free."""
    return _block_diag2(_scalar_stiffness(dofmap, rule))


def assemble_divergence(dofmap: DofMap, rule: QuadratureRule) -> sp.csr_matrix:
    """Pressure-velocity coupling D with D[i, j] = (psi_i, d_c phi_j)."""
    t = element_tables(dofmap, rule)
    n = dofmap.n_p2
    blocks = []
    for comp in range(2):
        local = np.einsum("q,qi,eqj,e->eij", t.weights, t.v1,
                          t.grad2[:, :, :, comp], t.det)
        blocks.append(_scatter(local, dofmap.tri_p1, dofmap.tri_p2,
                               (dofmap.n_pressure, n)))
    return sp.hstack(blocks, format="csr")


def assemble_graddiv(dofmap: DofMap, rule: QuadratureRule) -> sp.csr_matrix:
    """Grad-div operator (div phi_j, div phi_i), coupling the components."""
    t = element_tables(dofmap, rule)
    n = dofmap.n_p2
    gw = t.grad2 * np.sqrt(t.weights)[None, :, None, None]
    blocks = [[None, None], [None, None]]
    for a in range(2):
        for b in range(a, 2):
            local = np.einsum("eqi,eqj,e->eij", gw[:, :, :, a],
                              gw[:, :, :, b], t.det)
            blocks[a][b] = _scatter(local, dofmap.tri_p2, dofmap.tri_p2, (n, n))
    blocks[1][0] = blocks[0][1].T.tocsr()  # keeps the matrix bitwise symmetric
    return sp.bmat(blocks, format="csr")


def convection_block(dofmap: DofMap, rule: QuadratureRule,
                     w: np.ndarray) -> sp.csr_matrix:
    """Scalar block of the skew-symmetrized convection form for advecting
    field w: C[i, j] = ((w.grad) psi_j, psi_i) + 1/2 ((div w) psi_j, psi_i)."""
    if w.shape != (dofmap.n_velocity,):
        raise InvalidConfigError(
            f"advecting field has size {w.shape}, expected ({dofmap.n_velocity},)")
    t = element_tables(dofmap, rule)
    n = dofmap.n_p2
    w1 = w[:n][dofmap.tri_p2]   # (nt, 6)
    w2 = w[n:][dofmap.tri_p2]
    w1q = np.einsum("ei,qi->eq", w1, t.v2)
    w2q = np.einsum("ei,qi->eq", w2, t.v2)
    divw = (np.einsum("ei,eqi->eq", w1, t.grad2[:, :, :, 0])
            + np.einsum("ei,eqi->eq", w2, t.grad2[:, :, :, 1]))
    adv = (w1q[:, :, None] * t.grad2[:, :, :, 0]
           + w2q[:, :, None] * t.grad2[:, :, :, 1]
           + 0.5 * divw[:, :, None] * t.v2[None, :, :])  # (nt, nq, 6) acting on j
    local = np.einsum("q,qi,eqj,e->eij", t.weights, t.v2, adv, t.det)
    return _scatter(local, dofmap.tri_p2, dofmap.tri_p2, (n, n))


def assemble_convection(dofmap: DofMap, rule: QuadratureRule,
                        w: np.ndarray) -> sp.csr_matrix:
    """Vector convection operator C(w) on the velocity space."""
    return _block_diag2(convection_block(dofmap, rule, w))


@dataclass(frozen=True, eq=False)
class NudgingOperator:
    """Factorized nudging form B = E^T W E.

    E maps scalar P2 coefficients to the coarse representation (cell averages
    or coarse nodal values), W is the coarse Gram matrix (diagonal cell areas
    or the coarse P1 mass matrix).  `matrix` is the assembled velocity-space
    form; `data_weight` = E^T W, applied to coarse observations of the datum.
    """
    kind: str
    E: sp.csr_matrix
    W: sp.csr_matrix
    matrix: sp.csr_matrix        # (2n, 2n)
    data_weight: sp.csr_matrix   # (n, nc) scalar-component E^T W


def cell_integral_matrix(dofmap: DofMap, grid: CoarseGrid,
                         rule: QuadratureRule | None = None) -> sp.csr_matrix:
    """Sparse (nc, n_p2) map from P2 coefficients to integrals over coarse
    cells; exact for P2 with the default degree-5 rule."""
    if rule is None:
        rule = fem.quadrature_rule(5)
    t = element_tables(dofmap, rule)
    nt = dofmap.mesh.n_triangles
    cell_of_tri = np.empty(nt, dtype=np.int64)
    for c, tris in enumerate(grid.cell_to_fine_triangles):
        cell_of_tri[tris] = c
    local = np.einsum("q,qi,e->ei", t.weights, t.v2, t.det)  # (nt, 6)
    rows = np.repeat(cell_of_tri, 6)
    cols = dofmap.tri_p2.ravel()
    E = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(grid.n_cells, dofmap.n_p2)).tocsr()
    E.sum_duplicates()
    E.sort_indices()
    return E


def coarse_node_selection(dofmap: DofMap, grid: CoarseGrid) -> sp.csr_matrix:
    """Selection matrix picking the P2 nodal values at the coarse vertices."""
    N = dofmap.mesh.N
    M = 2 * N + 1
    nk = grid.n_cells_per_side
    ii = np.rint(grid.coarse_vertices[:, 0] * 2 * N).astype(np.int64)
    jj = np.rint(grid.coarse_vertices[:, 1] * 2 * N).astype(np.int64)
    cols = jj * M + ii
    ncn = (nk + 1) ** 2
    rows = np.arange(ncn)
    return sp.csr_matrix((np.ones(ncn), (rows, cols)), shape=(ncn, dofmap.n_p2))


def build_nudging(dofmap: DofMap, grid: CoarseGrid, kind: str) -> NudgingOperator:
    """Nudging Gram operator for the given interpolant kind ('pc'/'lagrange')."""
    if grid.mesh is not dofmap.mesh and grid.mesh.N != dofmap.mesh.N:
        raise InvalidConfigError("coarse grid built on a different fine mesh")
    if kind == "pc":
        Eint = cell_integral_matrix(dofmap, grid)
        area = grid.H ** 2
        E = Eint / area                       # coefficients -> cell averages
        W = sp.identity(grid.n_cells, format="csr") * area
    elif kind == "lagrange":
        from .mesh import build_fine_mesh
        from .fem import build_dofmap
        if grid.n_cells_per_side < 2:
            raise InvalidConfigError("Lagrange observation needs at least 2 coarse cells per side")
        E = coarse_node_selection(dofmap, grid)
        cmesh = build_fine_mesh(grid.n_cells_per_side)
        cdof = build_dofmap(cmesh)
        rule = fem.quadrature_rule(5)
        t = element_tables(cdof, rule)
        local = np.einsum("q,qi,qj,e->eij", t.weights, t.v1, t.v1, t.det)
        W = _scatter(local, cdof.tri_p1, cdof.tri_p1,
                     (cmesh.n_vertices, cmesh.n_vertices))
    else:
        raise InvalidConfigError(f"unknown interpolant kind {kind!r}")
    data_weight = (E.T @ W).tocsr()
    block = (data_weight @ E).tocsr()
    return NudgingOperator(kind=kind, E=E, W=W.tocsr(),
                           matrix=_block_diag2(block), data_weight=data_weight)


def assemble_nudging(dofmap: DofMap, grid: CoarseGrid, kind: str) -> sp.csr_matrix:
    return build_nudging(dofmap, grid, kind).matrix


def assemble_load(dofmap: DofMap, rule: QuadratureRule, f, t: float) -> np.ndarray:
    """Load vector for a spatial function f(x, y, t) -> (f1, f2)."""
    tab = element_tables(dofmap, rule)
    x = tab.xq[:, :, 0]
    y = tab.xq[:, :, 1]
    f1, f2 = f(x, y, t)
    f1 = np.broadcast_to(np.asarray(f1, dtype=float), x.shape)
    f2 = np.broadcast_to(np.asarray(f2, dtype=float), x.shape)
    out = np.zeros(dofmap.n_velocity)
    n = dofmap.n_p2
    loc1 = np.einsum("q,eq,qi,e->ei", tab.weights, f1, tab.v2, tab.det)
    loc2 = np.einsum("q,eq,qi,e->ei", tab.weights, f2, tab.v2, tab.det)
    np.add.at(out, dofmap.tri_p2, loc1)
    np.add.at(out[n:], dofmap.tri_p2, loc2)
    return out


def pressure_mean_vector(dofmap: DofMap, rule: QuadratureRule) -> np.ndarray:
    """Vector m with m[i] = integral of pressure basis psi_i."""
    t = element_tables(dofmap, rule)
    out = np.zeros(dofmap.n_pressure)
    local = np.einsum("q,qi,e->ei", t.weights, t.v1, t.det)
    np.add.at(out, dofmap.tri_p1, local)
    return out


def apply_dirichlet(A: sp.csr_matrix, boundary: np.ndarray,
                    rhs: np.ndarray | None = None,
                    unit_diagonal: bool = True):
    """Symmetric elimination of homogeneous Dirichlet dofs on a square matrix.

    Boundary rows and columns are zeroed and (optionally) a unit diagonal is
    placed; matching rhs entries are zeroed.  Returns the matrix, or
    (matrix, rhs) when a rhs is given.
    """
    n = A.shape[0]
    keep = np.ones(n)
    keep[boundary] = 0.0
    Z = sp.diags(keep)
    out = (Z @ A @ Z).tocsr()
    if unit_diagonal:
        ones = np.zeros(n)
        ones[boundary] = 1.0
        out = (out + sp.diags(ones)).tocsr()
    out.sort_indices()
    if rhs is None:
        return out
    r = rhs.copy()
    r[boundary] = 0.0
    return out, r


def zero_columns(A: sp.csr_matrix, cols: np.ndarray) -> sp.csr_matrix:
    """Zero the given columns of a rectangular coupling block."""
    keep = np.ones(A.shape[1])
    keep[cols] = 0.0
    out = (A @ sp.diags(keep)).tocsr()
    out.sort_indices()
    return out


def dump_triplets(A: sp.spmatrix, path) -> None:
    """Write a matrix as 'row col value' lines (debugging aid)."""
    coo = A.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """All time-independent operators of the scheme."""
    M: sp.csr_matrix
    K: sp.csr_matrix
    D: sp.csr_matrix
    G: sp.csr_matrix
    nudging: NudgingOperator
    pressure_mean: np.ndarray

    @property
    def B_nudge(self) -> sp.csr_matrix:
        return self.nudging.matrix


def build_operator_set(dofmap: DofMap, grid: CoarseGrid, kind: str,
                       rule: QuadratureRule | None = None) -> OperatorSet:
    if rule is None:
        rule = fem.quadrature_rule(5)
    return OperatorSet(
        M=assemble_mass(dofmap, rule),
        K=assemble_stiffness(dofmap, rule),
        D=assemble_divergence(dofmap, rule),
        G=assemble_graddiv(dofmap, rule),
        nudging=build_nudging(dofmap, grid, kind),
        pressure_mean=pressure_mean_vector(dofmap, rule),
    )

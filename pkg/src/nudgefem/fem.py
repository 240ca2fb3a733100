"""P2/P1 reference bases, triangle quadrature, and degree-of-freedom maps.

Local node order on the reference triangle (0,0)-(1,0)-(0,1): the three
vertices followed by the edge midpoints m01, m12, m20.  Gradients are returned
in reference coordinates; callers map them with the inverse Jacobian of the
affine element map.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import InvalidConfigError
from .mesh import FineMesh


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sum to 1/2
    degree: int

    @property
    def xy(self) -> np.ndarray:
        """Reference (x, y) coordinates of the quadrature points."""
        return self.points[:, 1:]


def eval_basis_p1(point):
    """Linear basis values and reference gradients at a barycentric point."""
    lam = np.asarray(point, dtype=float)
    values = lam.copy()
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return values, grads


def eval_basis_p2(point):
    """Quadratic Lagrange basis values and reference gradients."""
    lam = np.asarray(point, dtype=float)
    l0, l1, l2 = lam
    values = np.array([
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l0 * l1,
        4 * l1 * l2,
        4 * l2 * l0,
    ])
    # d(lam)/d(x,y) rows for (l0, l1, l2)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.array([
        (4 * l0 - 1) * dl[0],
        (4 * l1 - 1) * dl[1],
        (4 * l2 - 1) * dl[2],
        4 * (l1 * dl[0] + l0 * dl[1]),
        4 * (l2 * dl[1] + l1 * dl[2]),
        4 * (l0 * dl[2] + l2 * dl[0]),
    ])
    return values, grads


# classic symmetric rules; barycentric points and weights summing to 1
_DUNAVANT = {
    1: ([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: ([(2 / 3, 1 / 6, 1 / 6), (1 / 6, 2 / 3, 1 / 6), (1 / 6, 1 / 6, 2 / 3)],
        [1 / 3, 1 / 3, 1 / 3]),
}


def _symmetric_orbit(a):
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _dunavant5():
    pts = [(1 / 3, 1 / 3, 1 / 3)]
    wts = [0.225]
    a1, w1 = 0.470142064105115, 0.132394152788506
    a2, w2 = 0.101286507323456, 0.125939180544827
    pts += _symmetric_orbit(a1) + _symmetric_orbit(a2)
    wts += [w1] * 3 + [w2] * 3
    return pts, wts


_DUNAVANT[5] = _dunavant5()


def _conical_product(degree: int):
    """Collapsed Gauss rule on the triangle, exact to `degree`, positive weights."""
    n = (degree + 2) // 2  # 2n-1 >= degree
    xg, wg = roots_legendre(n)          # [-1, 1], weight 1
    xj, wj = roots_jacobi(n, 1.0, 0.0)  # [-1, 1], weight (1-x)
    xi = (xg + 1.0) / 2.0
    wi = wg / 2.0
    eta = (xj + 1.0) / 2.0
    we = wj / 4.0
    pts = []
    wts = []
    for e, w_e in zip(eta, we):
        for s, w_s in zip(xi, wi):
            x = s * (1.0 - e)
            y = e
            pts.append((1.0 - x - y, x, y))
            wts.append(2.0 * w_e * w_s)  # normalize so weights sum to 1
    return pts, wts


@lru_cache(maxsize=None)
def quadrature_rule(degree: int) -> QuadratureRule:
    """Triangle quadrature exact to at least `degree` (1..10).

    Rules are cached, so equal degrees share one object and downstream
    per-mesh tabulations can be reused.
    """
    if not 1 <= degree <= 10:
        raise InvalidConfigError(f"unsupported quadrature degree {degree}")
    if degree in _DUNAVANT:
        pts, wts = _DUNAVANT[degree]
    elif degree <= 5:
        pts, wts = _DUNAVANT[5]
    else:
        pts, wts = _conical_product(degree)
    points = np.asarray(pts, dtype=float)
    weights = np.asarray(wts, dtype=float) / 2.0  # reference triangle area 1/2
    return QuadratureRule(points=points, weights=weights, degree=degree)


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: FineMesh
    p2_coords: np.ndarray        # ((2N+1)^2, 2) velocity nodes per component
    p1_coords: np.ndarray        # ((N+1)^2, 2) pressure nodes
    tri_p2: np.ndarray           # (nt, 6) scalar P2 dof per triangle, local order
    tri_p1: np.ndarray           # (nt, 3) pressure dof per triangle
    boundary_p2: np.ndarray      # boundary node indices, one component
    jac: np.ndarray              # (nt, 2, 2) element Jacobians
    jac_inv: np.ndarray          # (nt, 2, 2)
    det_jac: np.ndarray          # (nt,)

    @property
    def n_p2(self) -> int:
        return self.p2_coords.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.p1_coords.shape[0]

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_p2

    @property
    def boundary_velocity(self) -> np.ndarray:
        """Boundary dofs for both components (component-major numbering)."""
        return np.concatenate([self.boundary_p2, self.boundary_p2 + self.n_p2])


def build_dofmap(mesh: FineMesh) -> DofMap:
    """Dof tables for the Taylor-Hood pair on a structured mesh.

    Scalar P2 dofs live on the refined (2N+1)^2 lattice with spacing h/2,
    numbered row-major; velocity dofs are component-major on top of that.
    Pressure dofs coincide with the mesh vertices.
    """
    N = mesh.N
    M = 2 * N + 1
    side = np.linspace(0.0, 1.0, M)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    p2_coords = np.column_stack([xx.ravel(), yy.ravel()])

    def p2_idx(ii, jj):
        return jj * M + ii

    nt = mesh.n_triangles
    tri_p2 = np.empty((nt, 6), dtype=np.int64)
    # fine-lattice coordinates (in units of h/2) of each triangle's vertices
    verts = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    vi = np.rint(verts[:, :, 0] * 2 * N).astype(np.int64)
    vj = np.rint(verts[:, :, 1] * 2 * N).astype(np.int64)
    tri_p2[:, :3] = p2_idx(vi, vj)
    # midpoints of edges (0,1), (1,2), (2,0)
    for loc, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        mi = (vi[:, a] + vi[:, b]) // 2
        mj = (vj[:, a] + vj[:, b]) // 2
        tri_p2[:, 3 + loc] = p2_idx(mi, mj)

    tri_p1 = mesh.triangles.copy()

    on_edge = np.isin(p2_coords[:, 0], (0.0, 1.0)) | np.isin(p2_coords[:, 1], (0.0, 1.0))
    boundary_p2 = np.flatnonzero(on_edge)

    jac = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    jac_inv = np.empty_like(jac)
    jac_inv[:, 0, 0] = jac[:, 1, 1] / det
    jac_inv[:, 0, 1] = -jac[:, 0, 1] / det
    jac_inv[:, 1, 0] = -jac[:, 1, 0] / det
    jac_inv[:, 1, 1] = jac[:, 0, 0] / det

    return DofMap(mesh=mesh, p2_coords=p2_coords, p1_coords=mesh.vertices.copy(),
                  tri_p2=tri_p2, tri_p1=tri_p1, boundary_p2=boundary_p2,
                  jac=jac, jac_inv=jac_inv, det_jac=det)


def basis_tables(rule: QuadratureRule):
    """P2/P1 values and reference gradients tabulated at the rule's points.

    Returns (v2, g2, v1, g1) with shapes (nq,6), (nq,6,2), (nq,3), (nq,3,2).
    """
    v2 = np.empty((len(rule.weights), 6))
    g2 = np.empty((len(rule.weights), 6, 2))
    v1 = np.empty((len(rule.weights), 3))
    g1 = np.empty((len(rule.weights), 3, 2))
    for q, lam in enumerate(rule.points):
        v2[q], g2[q] = eval_basis_p2(lam)
        v1[q], g1[q] = eval_basis_p1(lam)
    return v2, g2, v1, g1

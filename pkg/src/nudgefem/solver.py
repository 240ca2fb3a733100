"""Sparse linear algebra and the bordered saddle-point solve.

The zero-mean pressure constraint is enforced with a single Lagrange
multiplier row, so the per-step system is

    [ A   D^T  0 ] [u]   [rhs_u]
    [ D   0    m ] [p] = [rhs_p]
    [ 0   m^T  0 ] [s]   [0]

with A the (Dirichlet-eliminated) velocity block and m the pressure basis
integrals.  Systems are desk-scale, so a direct sparse LU is used throughout.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidConfigError, SingularMatrixError, SolverQualityError

DIV_TOL = 1e-9
MEAN_TOL = 1e-10


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    if A.shape[1] != x.shape[0]:
        raise InvalidConfigError(f"spmv dimension mismatch: {A.shape} vs {x.shape}")
    return A @ x


class Factorization:
    """Reusable sparse LU handle."""

    def __init__(self, A: sp.spmatrix):
        if A.shape[0] != A.shape[1]:
            raise InvalidConfigError(f"matrix is not square: {A.shape}")
        try:
            self._lu = splu(A.tocsc())
        except RuntimeError as exc:  # SuperLU reports 'Factor is exactly singular'
            raise SingularMatrixError(str(exc)) from exc
        self.shape = A.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        if b.shape[0] != self.shape[0]:
            raise InvalidConfigError(f"rhs size {b.shape} vs matrix {self.shape}")
        return self._lu.solve(b)


def factorize(A: sp.spmatrix) -> Factorization:
    return Factorization(A)


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    A: sp.csr_matrix       # velocity block, Dirichlet-eliminated
    D: sp.csr_matrix       # pressure-velocity coupling, boundary columns zeroed
    m: np.ndarray          # pressure mean-value row
    rhs: np.ndarray        # stacked (n_vel + n_pressure + 1)

    @property
    def n_velocity(self) -> int:
        return self.A.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.D.shape[0]


def bordered_matrix(A: sp.spmatrix, D: sp.spmatrix, m: np.ndarray) -> sp.csr_matrix:
    npr = D.shape[0]
    m_col = sp.csr_matrix(m.reshape(npr, 1))
    return sp.bmat([[A, D.T, None],
                    [D, None, m_col],
                    [None, m_col.T, None]], format="csr")


class FrozenPinnedSolver:
    """Direct solver for the saddle system, reusing its LU across solves.

    The mean-value constraint is imposed after the fact: the divergence rows
    sum to zero (the constant pressure mode), so replacing one of them with
    the pin p_0 = 0 yields a nonsingular system with the same velocity, and
    the pressure is then shifted to exact zero weighted mean.  This keeps the
    dense mean-value border out of the factorization, where it would cause
    severe fill-in.

    Between successive time steps only the linearized convection block
    drifts, so the factorization of a recent matrix keeps working as an
    iterative-refinement preconditioner; it is refreshed whenever refinement
    converges slowly or stalls above tolerance.
    """

    def __init__(self, D: sp.csr_matrix, m: np.ndarray,
                 tol: float = 1e-12, stall_tol: float = 1e-11,
                 max_refine: int = 30, refresh_sweeps: int = 8):
        npr, nv = D.shape
        self._D = D.tocsr()
        self._DT = D.T.tocsr()
        D_pin = D.tolil(copy=True)
        D_pin[0, :] = 0.0
        self._D_pin = D_pin.tocsr()
        self._pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(npr, npr))
        self._m = np.asarray(m, dtype=float)
        self._nv = nv
        self._npr = npr
        self._lu = None
        self._refresh_pending = False
        self._x_last = None
        self._x_last2 = None
        self.tol = tol
        self.stall_tol = stall_tol
        self.max_refine = max_refine
        self.refresh_sweeps = refresh_sweeps
        self.factorizations = 0

    def _matrix(self, A: sp.spmatrix) -> sp.csr_matrix:
        return sp.bmat([[A, self._DT], [self._D_pin, self._pin]], format="csr")

    def _apply(self, A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
        u = x[:self._nv]
        p = x[self._nv:]
        top = A @ u + self._DT @ p
        bot = self._D_pin @ u
        bot[0] += p[0]
        return np.concatenate([top, bot])

    def _refactor(self, A: sp.spmatrix):
        self._lu = factorize(self._matrix(A))
        self._refresh_pending = False
        self.factorizations += 1

    def _initial_guess(self, A: sp.spmatrix, rhs: np.ndarray, bnorm: float):
        """Warm start from the extrapolated previous solutions when helpful.

        Consecutive solves come from consecutive time steps, so the linear
        extrapolation of the last two solutions is already close and saves
        refinement sweeps; it is discarded if its residual is no better than
        the right-hand side itself.
        """
        if self._x_last is not None and self._x_last2 is not None:
            x0 = 2.0 * self._x_last - self._x_last2
            r0 = rhs - self._apply(A, x0)
            if float(np.abs(r0).max()) <= bnorm:
                return x0 + self._lu.solve(r0)
        return self._lu.solve(rhs)

    def _refine(self, A: sp.spmatrix, rhs: np.ndarray):
        bnorm = max(float(np.abs(rhs).max()), np.finfo(float).tiny)
        x = self._initial_guess(A, rhs, bnorm)
        prev = np.inf
        for sweep in range(1, self.max_refine + 1):
            r = rhs - self._apply(A, x)
            rn = float(np.abs(r).max())
            if rn <= self.tol * bnorm:
                return x, True, sweep
            if rn > 0.25 * prev:  # stalled: roundoff floor or stale LU
                return x, rn <= self.stall_tol * bnorm, sweep
            x = x + self._lu.solve(r)
            prev = rn
        return x, False, self.max_refine

    def solve(self, A: sp.spmatrix, rhs: np.ndarray,
              div_tol: float = DIV_TOL, mean_tol: float = MEAN_TOL):
        """Solve for (u, p) given the current velocity block and stacked rhs.

        `rhs` holds the velocity load followed by the divergence rows; its
        pressure part is normally zero (homogeneous incompressibility).
        """
        if rhs.shape[0] != self._nv + self._npr:
            raise InvalidConfigError(
                f"rhs size {rhs.shape[0]} vs system {self._nv + self._npr}")
        b = rhs.copy()
        # The divergence rows sum to zero, so a constant component in the
        # pressure rhs is incompatible and belongs to the multiplier; remove
        # it (this leaves the velocity and pressure unchanged).
        b[self._nv:] -= b[self._nv:].mean()
        b[self._nv] = 0.0  # pinned row
        if self._lu is None or self._refresh_pending:
            self._refactor(A)
        x, ok, sweeps = self._refine(A, b)
        if not ok:
            self._refactor(A)
            x, ok, sweeps = self._refine(A, b)
            if not ok:
                raise SolverQualityError(
                    "iterative refinement failed to converge after refactorization")
        self._refresh_pending = sweeps > self.refresh_sweeps
        self._x_last2 = self._x_last
        self._x_last = x
        u = x[:self._nv]
        p = x[self._nv:]
        p = p - (self._m @ p) / self._m.sum()
        check_saddle_residuals(self._D, self._m, u, p, div_tol, mean_tol)
        return u, p


def solve_saddle(system: SaddleSystem, div_tol: float = DIV_TOL,
                 mean_tol: float = MEAN_TOL):
    """One-shot solve of the multiplier system with quality gates."""
    nv = system.n_velocity
    npr = system.n_pressure
    pinned = FrozenPinnedSolver(system.D, system.m)
    return pinned.solve(system.A, system.rhs[:nv + npr],
                        div_tol=div_tol, mean_tol=mean_tol)


def check_saddle_residuals(D: sp.spmatrix, m: np.ndarray, u: np.ndarray,
                           p: np.ndarray, div_tol: float = DIV_TOL,
                           mean_tol: float = MEAN_TOL):
    """Raise SolverQualityError when constraint residuals exceed tolerance."""
    div_res = float(np.abs(D @ u).max()) if D.shape[0] else 0.0
    mean_res = float(abs(m @ p))
    if div_res > div_tol or mean_res > mean_tol:
        raise SolverQualityError(
            f"constraint residuals too large: |Du|_inf={div_res:.3e} "
            f"(tol {div_tol:.0e}), |m.p|={mean_res:.3e} (tol {mean_tol:.0e})")
    return div_res, mean_res

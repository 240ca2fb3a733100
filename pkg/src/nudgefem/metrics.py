"""Error norms against the closed-form reference solution."""

import numpy as np

from . import assembly, fem, observe


def l2_velocity_error(dofmap, coeffs: np.ndarray, u_fn, t: float,
                      degree: int = 8) -> float:
    """|u_h - u(., t)|_{L2} by elementwise quadrature."""
    rule = fem.quadrature_rule(degree)
    tab = assembly.element_tables(dofmap, rule)
    n = dofmap.n_p2
    uh1 = np.einsum("ei,qi->eq", coeffs[:n][dofmap.tri_p2], tab.v2)
    uh2 = np.einsum("ei,qi->eq", coeffs[n:][dofmap.tri_p2], tab.v2)
    x = tab.xq[:, :, 0]
    y = tab.xq[:, :, 1]
    u1, u2 = u_fn(x, y, t)
    sq = (uh1 - u1) ** 2 + (uh2 - u2) ** 2
    return float(np.sqrt(np.einsum("q,eq,e->", tab.weights, sq, tab.det)))


def l2_velocity_norm_exact(dofmap, u_fn, t: float, degree: int = 8) -> float:
    """|u(., t)|_{L2} of a continuous field by quadrature."""
    zeros = np.zeros(dofmap.n_velocity)
    return l2_velocity_error(dofmap, zeros, u_fn, t, degree)


def observation_error_ratio(kind, grid, dofmap, coeffs: np.ndarray, u_fn,
                            t: float, l2_err: float | None = None) -> float:
    """|I_H(u_h - u)|_0 / |u_h - u|_0 with the exact datum observed exactly."""
    coarse_uh = observe.apply_interpolant(kind, grid, coeffs)
    coarse_u = observe.observe_exact(kind, grid, u_fn, t)
    num = observe.coarse_gram_norm(kind, grid, coarse_uh - coarse_u)
    if l2_err is None:
        l2_err = l2_velocity_error(dofmap, coeffs, u_fn, t)
    return num / l2_err if l2_err > 0 else 0.0

"""Fast property suite: algebraic identities checked without full simulations.

Each check returns (name, passed, detail); the CLI `verify` subcommand and the
acceptance tests both run this list.
"""

import math

import numpy as np

from . import assembly, fem, manufactured, observe, timeloop
from .mesh import build_coarse_grid, build_fine_mesh


def _monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def check_quadrature_exactness(tol: float = 1e-14):
    worst = 0.0
    for degree in range(1, 11):
        rule = fem.quadrature_rule(degree)
        x = rule.points[:, 1]
        y = rule.points[:, 2]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                approx = float(np.sum(rule.weights * x ** a * y ** b))
                worst = max(worst, abs(approx - _monomial_integral(a, b)))
    return worst <= tol, f"max monomial defect {worst:.3e}"


def check_skew_symmetry(tol: float = 1e-12, pairs: int = 50):
    rng = np.random.default_rng(7)
    worst = 0.0
    for N in (2, 4, 8):
        dofmap = fem.build_dofmap(build_fine_mesh(N))
        rule = fem.quadrature_rule(5)
        bd = dofmap.boundary_velocity
        for _ in range(pairs):
            w = rng.standard_normal(dofmap.n_velocity)
            v = rng.standard_normal(dofmap.n_velocity)
            w[bd] = 0.0
            v[bd] = 0.0
            C = assembly.assemble_convection(dofmap, rule, w)
            worst = max(worst, abs(float(v @ (C @ v))))
    return worst <= tol, f"max |v^T C(w) v| {worst:.3e}"


def _direct_quadrature_norms(dofmap, grid, v, degree: int = 5):
    """Straight per-element quadrature of |v|^2, |grad v|^2, |div v|^2 and the
    coarse-average norm, written independently of the assembly routines."""
    rule = fem.quadrature_rule(degree)
    n = dofmap.n_p2
    verts = dofmap.mesh.vertices[dofmap.mesh.triangles]
    cell_of = np.empty(dofmap.mesh.n_triangles, dtype=np.int64)
    for c, tris in enumerate(grid.cell_to_fine_triangles):
        cell_of[tris] = c
    cell_int = np.zeros((grid.n_cells, 2))
    l2 = grad = div = 0.0
    for e in range(dofmap.mesh.n_triangles):
        p0, p1, p2 = verts[e]
        J = np.column_stack([p1 - p0, p2 - p0])
        det = abs(np.linalg.det(J))
        Jinv = np.linalg.inv(J)
        dofs = dofmap.tri_p2[e]
        u1 = v[:n][dofs]
        u2 = v[n:][dofs]
        for lam, wq in zip(rule.points, rule.weights):
            vals, grads_ref = fem.eval_basis_p2(lam)
            grads = grads_ref @ Jinv
            a1 = float(vals @ u1)
            a2 = float(vals @ u2)
            g1 = grads.T @ u1
            g2 = grads.T @ u2
            l2 += wq * det * (a1 * a1 + a2 * a2)
            grad += wq * det * float(g1 @ g1 + g2 @ g2)
            div += wq * det * (g1[0] + g2[1]) ** 2
            cell_int[cell_of[e], 0] += wq * det * a1
            cell_int[cell_of[e], 1] += wq * det * a2
    area = grid.H ** 2
    coarse = float(((cell_int / area) ** 2).sum() * area)
    return l2, grad, div, coarse


def check_gram_consistency(tol: float = 1e-12):
    mesh = build_fine_mesh(4)
    grid = build_coarse_grid(mesh, 2)
    dofmap = fem.build_dofmap(mesh)
    rule = fem.quadrature_rule(5)
    M = assembly.assemble_mass(dofmap, rule)
    K = assembly.assemble_stiffness(dofmap, rule)
    G = assembly.assemble_graddiv(dofmap, rule)
    B = assembly.assemble_nudging(dofmap, grid, "pc")
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(5):
        v = rng.standard_normal(dofmap.n_velocity)
        l2, grad, div, coarse = _direct_quadrature_norms(dofmap, grid, v)
        for mat, ref in ((M, l2), (K, grad), (G, div), (B, coarse)):
            got = float(v @ (mat @ v))
            worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    return worst <= tol, f"max Gram defect (relative) {worst:.3e}"


def check_projection_pythagoras(tol: float = 1e-12):
    mesh = build_fine_mesh(8)
    grid = build_coarse_grid(mesh, 2)
    dofmap = fem.build_dofmap(mesh)
    rng = np.random.default_rng(11)
    worst = 0.0
    c0_worst = 0.0
    for _ in range(10):
        v = rng.standard_normal(dofmap.n_velocity)
        ih, res, _ = observe.interpolant_residual_norms("pc", grid, v)
        norm_v = np.sqrt(ih ** 2 + res ** 2)  # holds iff projection is orthogonal
        rule = fem.quadrature_rule(5)
        tab = assembly.element_tables(dofmap, rule)
        n = dofmap.n_p2
        vq1 = np.einsum("ei,qi->eq", v[:n][dofmap.tri_p2], tab.v2)
        vq2 = np.einsum("ei,qi->eq", v[n:][dofmap.tri_p2], tab.v2)
        direct = np.sqrt(float(np.einsum("q,eq,e->", tab.weights,
                                         vq1 ** 2 + vq2 ** 2, tab.det)))
        worst = max(worst, abs(norm_v - direct) / direct)
        c0_worst = max(c0_worst, ih / direct)
    return (worst <= tol and c0_worst <= 1 + 1e-12,
            f"Pythagoras defect {worst:.3e}, c0 {c0_worst:.15f}")


def check_forcing_residual(tol: float = 1e-5, step: float = 1e-4):
    rng = np.random.default_rng(5)
    x = rng.uniform(0.05, 0.95, 200)
    y = rng.uniform(0.05, 0.95, 200)
    t = rng.uniform(0.0, 2.0, 200)
    nu = 0.7

    def u1(x, y, t):
        return manufactured.eval_u(x, y, t)[0]

    def u2(x, y, t):
        return manufactured.eval_u(x, y, t)[1]

    def d(f, var, x, y, t):
        hs = step
        if var == "x":
            return (f(x + hs, y, t) - f(x - hs, y, t)) / (2 * hs)
        if var == "y":
            return (f(x, y + hs, t) - f(x, y - hs, t)) / (2 * hs)
        return (f(x, y, t + hs) - f(x, y, t - hs)) / (2 * hs)

    def d2(f, var, x, y, t):
        hs = step
        if var == "x":
            return (f(x + hs, y, t) - 2 * f(x, y, t) + f(x - hs, y, t)) / hs ** 2
        return (f(x, y + hs, t) - 2 * f(x, y, t) + f(x, y - hs, t)) / hs ** 2

    a1, a2 = manufactured.eval_u(x, y, t)
    f1, f2 = manufactured.eval_f(x, y, t, nu)
    p = manufactured.eval_p
    fd1 = (d(u1, "t", x, y, t) - nu * (d2(u1, "x", x, y, t) + d2(u1, "y", x, y, t))
           + a1 * d(u1, "x", x, y, t) + a2 * d(u1, "y", x, y, t)
           + d(p, "x", x, y, t))
    fd2 = (d(u2, "t", x, y, t) - nu * (d2(u2, "x", x, y, t) + d2(u2, "y", x, y, t))
           + a1 * d(u2, "x", x, y, t) + a2 * d(u2, "y", x, y, t)
           + d(p, "y", x, y, t))
    worst = max(float(np.abs(f1 - fd1).max()), float(np.abs(f2 - fd2).max()))
    return worst <= tol, f"max forcing FD residual {worst:.3e}"


def check_exact_solution(tol: float = 1e-13):
    rng = np.random.default_rng(9)
    x = rng.uniform(0, 1, 100)
    y = rng.uniform(0, 1, 100)
    t = rng.uniform(0, 3, 100)
    du1dx, _, _, du2dy = manufactured.eval_grad_u(x, y, t)
    div_worst = float(np.abs(du1dx + du2dy).max())
    s = np.linspace(0, 1, 40)
    bdry = 0.0
    for bx, by in ((s, np.zeros_like(s)), (s, np.ones_like(s)),
                   (np.zeros_like(s), s), (np.ones_like(s), s)):
        u1, u2 = manufactured.eval_u(bx, by, 0.7)
        bdry = max(bdry, float(np.abs(u1).max()), float(np.abs(u2).max()))
    ok = div_worst <= tol and bdry <= tol
    return ok, f"max divergence {div_worst:.3e}, max boundary trace {bdry:.3e}"


def check_constraints_over_run(div_tol: float = 1e-9, mean_tol: float = 1e-10):
    cfg = timeloop.SimulationConfig(nu=0.01, beta=1.0, mu=0.05, N=8, k=2,
                                    T=1.0, dt=0.01)
    sim = timeloop.Simulation(cfg)
    worst_div = worst_mean = 0.0
    state = None
    for _, st in sim.run(collect_states=True):
        state = st
        if state.step == 0:
            continue
        worst_div = max(worst_div, float(np.abs(sim._D_el @ state.u_prev).max()))
        worst_mean = max(worst_mean, float(abs(sim._m @ state.p_prev)))
    ok = worst_div <= div_tol and worst_mean <= mean_tol and state.step == 100
    return ok, (f"{state.step} steps, max |Du|_inf {worst_div:.3e}, "
                f"max |m.p| {worst_mean:.3e}")


ALL_CHECKS = [
    ("quadrature exactness", check_quadrature_exactness),
    ("discrete skew-symmetry", check_skew_symmetry),
    ("Gram consistency", check_gram_consistency),
    ("coarse projection Pythagoras / c0", check_projection_pythagoras),
    ("manufactured forcing residual", check_forcing_residual),
    ("exact solution divergence/boundary", check_exact_solution),
    ("per-step constraint residuals", check_constraints_over_run),
]


def run_property_suite():
    results = []
    for name, fn in ALL_CHECKS:
        try:
            passed, detail = fn()
        except Exception as exc:
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, passed, detail))
    return results

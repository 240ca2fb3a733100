import numpy as np
import pytest

from nudgefem import assembly, fem, manufactured
from nudgefem.mesh import build_coarse_grid, build_fine_mesh

RULE = fem.quadrature_rule(5)


def dofmap(N):
    return fem.build_dofmap(build_fine_mesh(N))


# -- mass ------------------------------------------------------------------

def test_mass_total_is_domain_area():
    dm = dofmap(4)
    M = assembly.assemble_mass(dm, RULE)
    n = dm.n_p2
    block = M[:n, :n]
    assert block.sum() == pytest.approx(1.0, abs=1e-13)


def test_mass_symmetric():
    dm = dofmap(4)
    M = assembly.assemble_mass(dm, RULE)
    assert abs(M - M.T).max() == 0.0


def test_mass_positive_definite():
    dm = dofmap(4)
    M = assembly.assemble_mass(dm, RULE).toarray()
    eigs = np.linalg.eigvalsh(M)
    assert eigs.min() > 0.0


# -- stiffness ---------------------------------------------------------------

def test_stiffness_annihilates_constants():
    dm = dofmap(4)
    K = assembly.assemble_stiffness(dm, RULE)
    const = np.ones(dm.n_velocity)
    assert np.abs(K @ const).max() <= 1e-13


def test_stiffness_row_sums():
    dm = dofmap(4)
    K = assembly.assemble_stiffness(dm, RULE)
    assert np.abs(np.asarray(K.sum(axis=1))).max() <= 1e-13


def test_stiffness_positive_semidefinite():
    dm = dofmap(4)
    K = assembly.assemble_stiffness(dm, RULE)
    rng = np.random.default_rng(2)
    for _ in range(100):
        v = rng.standard_normal(dm.n_velocity)
        assert v @ (K @ v) >= -1e-12


# -- divergence --------------------------------------------------------------

def test_divergence_of_constant():
    dm = dofmap(4)
    D = assembly.assemble_divergence(dm, RULE)
    const = np.ones(dm.n_velocity)
    assert np.abs(D @ const).max() <= 1e-13


def test_divergence_of_rigid_rotation():
    dm = dofmap(4)
    D = assembly.assemble_divergence(dm, RULE)
    x, y = dm.p2_coords[:, 0], dm.p2_coords[:, 1]
    u = np.concatenate([-y, x])
    assert np.abs(D @ u).max() <= 1e-13


def test_divergence_theorem():
    dm = dofmap(4)
    D = assembly.assemble_divergence(dm, RULE)
    x = dm.p2_coords[:, 0]
    u = np.concatenate([x, np.zeros_like(x)])  # div u = 1
    assert float((D @ u).sum()) == pytest.approx(1.0, abs=1e-13)


# -- grad-div ------------------------------------------------------------------

def test_graddiv_constants_and_symmetry():
    dm = dofmap(4)
    G = assembly.assemble_graddiv(dm, RULE)
    const = np.ones(dm.n_velocity)
    assert np.abs(G @ const).max() <= 1e-13
    assert abs(G - G.T).max() == 0.0


def graddiv_norm_oracle(dm, v):
    """Straight per-element quadrature of |div v_h|^2."""
    total = 0.0
    n = dm.n_p2
    verts = dm.mesh.vertices[dm.mesh.triangles]
    for e in range(dm.mesh.n_triangles):
        J = np.column_stack([verts[e, 1] - verts[e, 0], verts[e, 2] - verts[e, 0]])
        det = abs(np.linalg.det(J))
        Jinv = np.linalg.inv(J)
        dofs = dm.tri_p2[e]
        for lam, w in zip(RULE.points, RULE.weights):
            _, grads_ref = fem.eval_basis_p2(lam)
            grads = grads_ref @ Jinv
            div = grads[:, 0] @ v[:n][dofs] + grads[:, 1] @ v[n:][dofs]
            total += w * det * div * div
    return total


def test_graddiv_matches_direct_quadrature():
    dm = dofmap(3)
    G = assembly.assemble_graddiv(dm, RULE)
    rng = np.random.default_rng(3)
    for _ in range(3):
        v = rng.standard_normal(dm.n_velocity)
        assert v @ (G @ v) == pytest.approx(graddiv_norm_oracle(dm, v), rel=1e-12)


# -- convection ------------------------------------------------------------------

def test_convection_zero_field():
    dm = dofmap(4)
    C = assembly.assemble_convection(dm, RULE, np.zeros(dm.n_velocity))
    assert abs(C).max() == 0.0


def test_convection_skew_symmetry():
    dm = dofmap(4)
    rng = np.random.default_rng(4)
    bd = dm.boundary_velocity
    for _ in range(5):
        w = rng.standard_normal(dm.n_velocity)
        w[bd] = 0.0  # no boundary flux, so the form is exactly skew
        C = assembly.assemble_convection(dm, RULE, w)
        assert abs(C + C.T).max() <= 1e-12
        v = rng.standard_normal(dm.n_velocity)
        assert abs(v @ (C @ v)) <= 1e-12


def test_convection_rejects_bad_size():
    dm = dofmap(2)
    from nudgefem.errors import InvalidConfigError
    with pytest.raises(InvalidConfigError):
        assembly.convection_block(dm, RULE, np.zeros(3))


# -- nudging ------------------------------------------------------------------

def test_nudging_constant_field():
    dm = dofmap(6)
    grid = build_coarse_grid(dm.mesh, 3)
    B = assembly.assemble_nudging(dm, grid, "pc")
    c = np.concatenate([np.full(dm.n_p2, 2.0), np.full(dm.n_p2, -1.0)])
    assert c @ (B @ c) == pytest.approx(5.0, rel=1e-13)  # |c|^2 * |domain|


def test_nudging_annihilates_zero_cell_means():
    dm = dofmap(6)
    grid = build_coarse_grid(dm.mesh, 3)
    nud = assembly.build_nudging(dm, grid, "pc")
    rng = np.random.default_rng(5)
    v = rng.standard_normal(dm.n_velocity)
    n = dm.n_p2
    E = nud.E.toarray()
    # project each component onto the kernel of the cell-average map
    proj = np.eye(n) - E.T @ np.linalg.solve(E @ E.T, E)
    v0 = np.concatenate([proj @ v[:n], proj @ v[n:]])
    assert np.abs(nud.matrix @ v0).max() <= 1e-12


def nudging_norm_oracle(dm, grid, v):
    """|I_H v|^2 with cell averages computed by an independent element loop."""
    n = dm.n_p2
    verts = dm.mesh.vertices[dm.mesh.triangles]
    cell_of = np.empty(dm.mesh.n_triangles, dtype=int)
    for c, tris in enumerate(grid.cell_to_fine_triangles):
        cell_of[tris] = c
    sums = np.zeros((grid.n_cells, 2))
    for e in range(dm.mesh.n_triangles):
        J = np.column_stack([verts[e, 1] - verts[e, 0], verts[e, 2] - verts[e, 0]])
        det = abs(np.linalg.det(J))
        dofs = dm.tri_p2[e]
        for lam, w in zip(RULE.points, RULE.weights):
            vals, _ = fem.eval_basis_p2(lam)
            sums[cell_of[e], 0] += w * det * (vals @ v[:n][dofs])
            sums[cell_of[e], 1] += w * det * (vals @ v[n:][dofs])
    area = grid.H ** 2
    return float(((sums / area) ** 2).sum() * area)


def test_nudging_matches_direct_quadrature():
    dm = dofmap(4)
    grid = build_coarse_grid(dm.mesh, 2)
    B = assembly.assemble_nudging(dm, grid, "pc")
    rng = np.random.default_rng(6)
    for _ in range(3):
        v = rng.standard_normal(dm.n_velocity)
        assert v @ (B @ v) == pytest.approx(nudging_norm_oracle(dm, grid, v),
                                            rel=1e-12)


# -- load ----------------------------------------------------------------------

def test_load_zero_forcing():
    dm = dofmap(4)
    f = assembly.assemble_load(dm, RULE, lambda x, y, t: (0.0 * x, 0.0 * x), 0.0)
    assert np.abs(f).max() == 0.0


def test_load_constant_forcing():
    dm = dofmap(4)
    f = assembly.assemble_load(dm, RULE, lambda x, y, t: (1.0 + 0 * x, 0.0 * x), 0.0)
    n = dm.n_p2
    assert f[:n].sum() == pytest.approx(1.0, abs=1e-13)
    assert np.abs(f[n:]).max() == 0.0


def load_oracle(dm, f, t):
    out = np.zeros(dm.n_velocity)
    n = dm.n_p2
    verts = dm.mesh.vertices[dm.mesh.triangles]
    for e in range(dm.mesh.n_triangles):
        p0 = verts[e, 0]
        J = np.column_stack([verts[e, 1] - p0, verts[e, 2] - p0])
        det = abs(np.linalg.det(J))
        dofs = dm.tri_p2[e]
        for lam, w in zip(RULE.points, RULE.weights):
            vals, _ = fem.eval_basis_p2(lam)
            xy = p0 + J @ lam[1:]
            f1, f2 = f(xy[0], xy[1], t)
            out[dofs] += w * det * f1 * vals
            out[n + np.asarray(dofs)] += w * det * f2 * vals
    return out


def test_load_matches_direct_quadrature():
    dm = dofmap(8)
    fn = lambda x, y, t: manufactured.eval_f(x, y, t, 0.01)
    got = assembly.assemble_load(dm, RULE, fn, 0.0)
    want = load_oracle(dm, fn, 0.0)
    np.testing.assert_allclose(got, want, atol=1e-13)


# -- constraints / boundary ------------------------------------------------------

def test_pressure_mean_vector_sums_to_domain_area():
    dm = dofmap(5)
    m = assembly.pressure_mean_vector(dm, RULE)
    assert m.sum() == pytest.approx(1.0, abs=1e-13)
    assert (m > 0).all()


def test_apply_dirichlet():
    dm = dofmap(4)
    M = assembly.assemble_mass(dm, RULE)
    bd = dm.boundary_velocity
    out = assembly.apply_dirichlet(M, bd)
    dense = out.toarray()
    interior = np.setdiff1d(np.arange(dm.n_velocity), bd)
    # boundary rows/cols reduced to the identity
    np.testing.assert_allclose(dense[np.ix_(bd, bd)], np.eye(bd.size))
    assert np.abs(dense[np.ix_(bd, interior)]).max() == 0.0
    assert np.abs(dense[np.ix_(interior, bd)]).max() == 0.0
    # interior block untouched, symmetry preserved
    np.testing.assert_array_equal(dense[np.ix_(interior, interior)],
                                  M.toarray()[np.ix_(interior, interior)])
    assert abs(out - out.T).max() == 0.0


def test_apply_dirichlet_rhs():
    dm = dofmap(2)
    M = assembly.assemble_mass(dm, RULE)
    bd = dm.boundary_velocity
    rhs = np.ones(dm.n_velocity)
    _, r = assembly.apply_dirichlet(M, bd, rhs=rhs)
    assert np.abs(r[bd]).max() == 0.0
    assert (r[np.setdiff1d(np.arange(dm.n_velocity), bd)] == 1.0).all()


def test_zero_columns():
    dm = dofmap(2)
    D = assembly.assemble_divergence(dm, RULE)
    bd = dm.boundary_velocity
    out = assembly.zero_columns(D, bd)
    assert abs(out[:, bd]).max() == 0.0


def test_element_tables_cached():
    dm = dofmap(2)
    assert assembly.element_tables(dm, RULE) is assembly.element_tables(dm, RULE)


def test_dump_triplets(tmp_path):
    dm = dofmap(2)
    M = assembly.assemble_mass(dm, RULE)
    path = tmp_path / "m.txt"
    assembly.dump_triplets(M, path)
    rows = [line.split() for line in path.read_text().splitlines()]
    assert len(rows) == M.nnz
    r, c, v = rows[0]
    assert M.tocoo().data[0] == float(v)

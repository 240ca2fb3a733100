import math

import numpy as np
import pytest

from nudgefem import fem
from nudgefem.errors import InvalidConfigError
from nudgefem.mesh import build_fine_mesh


def monomial_integral(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_p1_centroid_and_nodal():
    vals, _ = fem.eval_basis_p1((1 / 3, 1 / 3, 1 / 3))
    np.testing.assert_allclose(vals, [1 / 3, 1 / 3, 1 / 3])
    vals, _ = fem.eval_basis_p1((1.0, 0.0, 0.0))
    np.testing.assert_allclose(vals, [1.0, 0.0, 0.0])


def test_p1_partition_of_unity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        lam = rng.dirichlet([1, 1, 1])
        vals, grads = fem.eval_basis_p1(lam)
        assert vals.sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-14)


def test_p2_nodal_property():
    # local order: vertices then midpoints m01, m12, m20
    nodes = [(1, 0, 0), (0, 1, 0), (0, 0, 1),
             (0.5, 0.5, 0), (0, 0.5, 0.5), (0.5, 0, 0.5)]
    table = np.array([fem.eval_basis_p2(lam)[0] for lam in nodes])
    np.testing.assert_allclose(table, np.eye(6), atol=1e-14)


def test_p2_partition_of_unity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        lam = rng.dirichlet([1, 1, 1])
        vals, grads = fem.eval_basis_p2(lam)
        assert vals.sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-13)


def test_quadrature_constant():
    rule = fem.quadrature_rule(1)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)


def test_quadrature_degree5_monomial():
    rule = fem.quadrature_rule(5)
    x, y = rule.points[:, 1], rule.points[:, 2]
    approx = float(np.sum(rule.weights * x ** 2 * y ** 3))
    assert approx == pytest.approx(1 / 420, abs=1e-16)


def test_quadrature_degree8_x3y3():
    rule = fem.quadrature_rule(8)
    x, y = rule.points[:, 1], rule.points[:, 2]
    approx = float(np.sum(rule.weights * x ** 3 * y ** 3))
    assert abs(approx - 1 / 1120) <= 1e-15


def test_quadrature_exactness_all_degrees():
    for degree in range(1, 11):
        rule = fem.quadrature_rule(degree)
        assert (rule.weights > 0).all()
        assert rule.weights.sum() == pytest.approx(0.5, abs=1e-14)
        x, y = rule.points[:, 1], rule.points[:, 2]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                approx = float(np.sum(rule.weights * x ** a * y ** b))
                assert abs(approx - monomial_integral(a, b)) <= 1e-14


def test_quadrature_rejects_bad_degree():
    with pytest.raises(InvalidConfigError):
        fem.quadrature_rule(0)
    with pytest.raises(InvalidConfigError):
        fem.quadrature_rule(11)


def test_quadrature_rules_are_cached():
    assert fem.quadrature_rule(5) is fem.quadrature_rule(5)


def test_dofmap_counts_n2():
    dm = fem.build_dofmap(build_fine_mesh(2))
    assert dm.n_p2 == 25
    assert dm.n_velocity == 50
    assert dm.n_pressure == 9
    assert dm.boundary_p2.size == 16


def test_dofmap_counts_n4():
    dm = fem.build_dofmap(build_fine_mesh(4))
    assert dm.n_p2 == 81


def test_dofmap_geometry():
    N = 4
    dm = fem.build_dofmap(build_fine_mesh(N))
    h = 1.0 / N
    np.testing.assert_allclose(dm.det_jac, h * h)
    # P2 dof coordinates recovered from triangle tables match vertex/midpoint
    verts = dm.mesh.vertices[dm.mesh.triangles]
    np.testing.assert_allclose(dm.p2_coords[dm.tri_p2[:, :3]], verts, atol=1e-15)
    mids = 0.5 * (verts + np.roll(verts, -1, axis=1))
    np.testing.assert_allclose(dm.p2_coords[dm.tri_p2[:, 3:]], mids, atol=1e-15)


def test_boundary_velocity_component_major():
    dm = fem.build_dofmap(build_fine_mesh(2))
    bd = dm.boundary_velocity
    assert bd.size == 2 * dm.boundary_p2.size
    assert (bd[dm.boundary_p2.size:] == dm.boundary_p2 + dm.n_p2).all()


def test_basis_tables_shapes():
    rule = fem.quadrature_rule(5)
    v2, g2, v1, g1 = fem.basis_tables(rule)
    nq = len(rule.weights)
    assert v2.shape == (nq, 6) and g2.shape == (nq, 6, 2)
    assert v1.shape == (nq, 3) and g1.shape == (nq, 3, 2)

"""Closed-form reference flow on the unit square and its consistent forcing.

The velocity is the curl of the stream function
    psi(x, y, t) = g(t) * 8 sin^2(pi x) (y(1-y))^2,   g(t) = (6 + 4 cos 4t)/10,
so it is exactly divergence-free and vanishes on the boundary.  The pressure
is g(t) sin(pi x) cos(pi y).  All derivative evaluators are hand-derived and
cross-checked against finite differences in the test suite.

Every evaluator broadcasts over numpy arrays of coordinates.
"""

import numpy as np

PI = np.pi


def amplitude(t):
    return (6.0 + 4.0 * np.cos(4.0 * t)) / 10.0


def amplitude_dt(t):
    return -1.6 * np.sin(4.0 * t)


def _spatial(x, y):
    """Shared spatial factors: returns (s, c, s2x, c2x, q, qp) with
    s = sin(pi x), c = cos(pi x), s2x = sin(2 pi x), c2x = cos(2 pi x),
    q = y(1-y), qp = 1-2y."""
    s = np.sin(PI * x)
    c = np.cos(PI * x)
    return s, c, np.sin(2 * PI * x), np.cos(2 * PI * x), y * (1.0 - y), 1.0 - 2.0 * y


def _shape_u(x, y):
    """Time-independent velocity profile U with u = g(t) U."""
    s, _, s2x, _, q, qp = _spatial(x, y)
    u1 = 16.0 * s * s * q * qp
    u2 = -8.0 * PI * s2x * q * q
    return u1, u2


def eval_u(x, y, t):
    u1, u2 = _shape_u(x, y)
    g = amplitude(t)
    return g * u1, g * u2


def eval_dt_u(x, y, t):
    u1, u2 = _shape_u(x, y)
    gd = amplitude_dt(t)
    return gd * u1, gd * u2


def _shape_grad_u(x, y):
    s, _, s2x, c2x, q, qp = _spatial(x, y)
    du1dx = 16.0 * PI * s2x * q * qp
    du1dy = 16.0 * s * s * (qp * qp - 2.0 * q)
    du2dx = -16.0 * PI * PI * c2x * q * q
    du2dy = -16.0 * PI * s2x * q * qp
    return du1dx, du1dy, du2dx, du2dy


def eval_grad_u(x, y, t):
    """Velocity gradient [[d u1/dx, d u1/dy], [d u2/dx, d u2/dy]]."""
    g = amplitude(t)
    du1dx, du1dy, du2dx, du2dy = _shape_grad_u(x, y)
    return g * du1dx, g * du1dy, g * du2dx, g * du2dy


def _shape_laplacian_u(x, y):
    s, _, s2x, c2x, q, qp = _spatial(x, y)
    lap1 = 32.0 * PI * PI * c2x * q * qp - 96.0 * s * s * qp
    lap2 = 32.0 * PI ** 3 * s2x * q * q - 8.0 * PI * s2x * (2.0 * qp * qp - 4.0 * q)
    return lap1, lap2


def eval_laplacian_u(x, y, t):
    g = amplitude(t)
    lap1, lap2 = _shape_laplacian_u(x, y)
    return g * lap1, g * lap2


def eval_p(x, y, t):
    return amplitude(t) * np.sin(PI * x) * np.cos(PI * y)


def eval_grad_p(x, y, t):
    g = amplitude(t)
    return (g * PI * np.cos(PI * x) * np.cos(PI * y),
            -g * PI * np.sin(PI * x) * np.sin(PI * y))


def eval_f(x, y, t, nu):
    """Forcing f = du/dt - nu*Lap(u) + (u.grad)u + grad p for the exact pair."""
    g = amplitude(t)
    gd = amplitude_dt(t)
    u1, u2 = _shape_u(x, y)
    du1dx, du1dy, du2dx, du2dy = _shape_grad_u(x, y)
    lap1, lap2 = _shape_laplacian_u(x, y)
    gp1, gp2 = eval_grad_p(x, y, t)
    conv1 = u1 * du1dx + u2 * du1dy
    conv2 = u1 * du2dx + u2 * du2dy
    f1 = gd * u1 - nu * g * lap1 + g * g * conv1 + gp1
    f2 = gd * u2 - nu * g * lap2 + g * g * conv2 + gp2
    return f1, f2

"""Built-in Lagrangians with analytic partials."""
from __future__ import annotations

import numpy as np

from .lagrangian import ConfigurationModel, MetricData, PartialBundle


def free_particle(n: int = 1, m: float = 1.0) -> ConfigurationModel:
    """L = m/2 v.v on flat R^n."""

    def lagrangian(s, x, v):
        return 0.5 * m * float(v @ v)

    def analytic(s, x, v):
        z = np.zeros(n)
        Z = np.zeros((n, n))
        return PartialBundle(z, m * v, Z, Z, m * np.eye(n), z)

    eye = np.eye(n)
    metric = MetricData(
        g=lambda x: eye.copy(),
        christoffel=lambda x: np.zeros((n, n, n)),
        riemann=lambda x: np.zeros((n, n, n, n)),
    )
    return ConfigurationModel(
        n, lagrangian, "analytic", analytic, metric, m, "free", {"n": n, "m": m}
    )


def harmonic_oscillator(n: int = 1, m: float = 1.0, omega: float = 1.0) -> ConfigurationModel:
    """L = m/2 (v.v - omega^2 x.x)."""
    w2 = omega**2

    def lagrangian(s, x, v):
        return 0.5 * m * (float(v @ v) - w2 * float(x @ x))

    def analytic(s, x, v):
        Z = np.zeros((n, n))
        return PartialBundle(-m * w2 * x, m * v, -m * w2 * np.eye(n), Z, m * np.eye(n), np.zeros(n))

    return ConfigurationModel(
        n, lagrangian, "analytic", analytic, None, m, "harmonic", {"n": n, "m": m, "omega": omega}
    )


def sphere_metric() -> MetricData:
    """Round unit 2-sphere in (theta, phi) coordinates."""

    def g(x):
        return np.diag([1.0, np.sin(x[0]) ** 2])

    def christoffel(x):
        th = x[0]
        G = np.zeros((2, 2, 2))
        G[0, 1, 1] = -np.sin(th) * np.cos(th)
        G[1, 0, 1] = G[1, 1, 0] = np.cos(th) / np.sin(th)
        return G

    def riemann(x):
        # constant curvature 1: R^a_{bcd} = delta^a_c g_bd - delta^a_d g_bc
        gx = g(x)
        eye = np.eye(2)
        return np.einsum("ac,bd->abcd", eye, gx) - np.einsum("ad,bc->abcd", eye, gx)

    return MetricData(g, christoffel, riemann)


def sphere(m: float = 1.0) -> ConfigurationModel:
    """L = m/2 (theta'^2 + sin^2(theta) phi'^2)."""

    def lagrangian(s, x, v):
        return 0.5 * m * (v[0] ** 2 + np.sin(x[0]) ** 2 * v[1] ** 2)

    def analytic(s, x, v):
        th = x[0]
        sn, cs = np.sin(th), np.cos(th)
        Lx = np.array([m * sn * cs * v[1] ** 2, 0.0])
        Lv = np.array([m * v[0], m * sn**2 * v[1]])
        Lxx = np.array([[m * np.cos(2 * th) * v[1] ** 2, 0.0], [0.0, 0.0]])
        Lxv = np.array([[0.0, m * np.sin(2 * th) * v[1]], [0.0, 0.0]])
        Lvv = np.diag([m, m * sn**2])
        return PartialBundle(Lx, Lv, Lxx, Lxv, Lvv, np.zeros(2))

    return ConfigurationModel(2, lagrangian, "analytic", analytic, sphere_metric(), m, "sphere", {"m": m})


def great_circle(s):
    """Equatorial geodesic theta = pi/2, phi = s (unit speed)."""
    s = np.asarray(s, dtype=float)
    return np.stack([np.full_like(s, np.pi / 2), s], axis=-1)


def harmonic_action(x_minus, x_plus, T, omega=1.0, m=1.0):
    """Classical action of the oscillator path from x_minus at -T to x_plus at T."""
    tau = 2.0 * T
    xm = np.asarray(x_minus, dtype=float)
    xp = np.asarray(x_plus, dtype=float)
    num = (xm @ xm + xp @ xp) * np.cos(omega * tau) - 2 * xm @ xp
    return float(m * omega * num / (2 * np.sin(omega * tau)))


def sphere_distance(p, q):
    """Great-circle distance between two (theta, phi) points on the unit sphere."""

    def unit(a):
        th, ph = a
        return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    c = np.clip(unit(p) @ unit(q), -1.0, 1.0)
    return float(np.arccos(c))

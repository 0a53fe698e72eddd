"""Lagrangian models, discretized trajectories and path functionals.

Index convention for mixed second partials: ``Lxv[mu, nu]`` is
d^2 L / dx^mu dv^nu, and ``Lvx`` is its transpose.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import GridMismatch, NonFiniteDerivative, SupportOutOfRange

FD_STEP = 1e-5
# second differences carry roundoff eps*|L|/h^2, which at 1e-5 can swamp Lvv
# when L is dominated by other terms
FD_STEP_SECOND = 1e-4


class PartialBundle(NamedTuple):
    Lx: np.ndarray
    Lv: np.ndarray
    Lxx: np.ndarray
    Lxv: np.ndarray
    Lvv: np.ndarray
    Lvs: np.ndarray

    @property
    def Lvx(self) -> np.ndarray:
        return self.Lxv.T


@dataclass(frozen=True)
class MetricData:
    """Riemannian metric with its Levi-Civita connection and curvature.

    ``christoffel(x)[mu, nu, rho]`` is Gamma^mu_{nu rho} and
    ``riemann(x)[mu, nu, rho, sigma]`` is R^mu_{nu rho sigma}, with
    R(X, Y)Z = R^mu_{nu rho sigma} Z^nu X^rho Y^sigma.
    """

    g: Callable[[np.ndarray], np.ndarray]
    christoffel: Callable[[np.ndarray], np.ndarray]
    riemann: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_metric(cls, g: Callable[[np.ndarray], np.ndarray]) -> "MetricData":
        """Build connection and curvature from ``g`` by finite differences."""

        def christoffel(x):
            return christoffel_fd(g, x)

        def riemann(x):
            return riemann_fd(christoffel, x)

        return cls(g=g, christoffel=christoffel, riemann=riemann)


def christoffel_fd(g, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    n = x.size
    dg = np.empty((n, n, n))  # dg[l, a, b] = d_l g_ab
    for l in range(n):
        e = np.zeros(n)
        e[l] = h * max(1.0, abs(x[l]))
        dg[l] = (g(x + e) - g(x - e)) / (2 * e[l])
    ginv = np.linalg.inv(g(x))
    # Gamma^m_{ab} = 1/2 g^{ml} (d_a g_lb + d_b g_la - d_l g_ab)
    lowered = 0.5 * (np.einsum("alb->lab", dg) + np.einsum("bla->lab", dg) - dg)
    return np.einsum("ml,lab->mab", ginv, lowered)


def riemann_fd(christoffel, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    n = x.size
    dG = np.empty((n, n, n, n))  # dG[r, m, a, b] = d_r Gamma^m_{ab}
    for r in range(n):
        e = np.zeros(n)
        e[r] = h * max(1.0, abs(x[r]))
        dG[r] = (christoffel(x + e) - christoffel(x - e)) / (2 * e[r])
    G = christoffel(x)
    # R^m_{n r s} = d_r G^m_{s n} - d_s G^m_{r n} + G^m_{r l} G^l_{s n} - G^m_{s l} G^l_{r n}
    R = (
        np.einsum("rmsn->mnrs", dG)
        - np.einsum("smrn->mnrs", dG)
        + np.einsum("mrl,lsn->mnrs", G, G)
        - np.einsum("msl,lrn->mnrs", G, G)
    )
    return R


@dataclass(frozen=True)
class ConfigurationModel:
    """A Lagrangian L(s, x, v) on an n-dimensional configuration space.

    ``analytic`` returns a :class:`PartialBundle`; when it is absent or
    ``partials_mode`` is ``"finite_difference"`` the partials come from
    central differences of ``lagrangian``.
    """

    n: int
    lagrangian: Callable[[float, np.ndarray, np.ndarray], float]
    partials_mode: str = "finite_difference"
    analytic: Optional[Callable[[float, np.ndarray, np.ndarray], PartialBundle]] = None
    metric: Optional[MetricData] = None
    mass: float = 1.0
    name: str = "model"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("configuration dimension must be positive")
        if self.partials_mode not in ("analytic", "finite_difference"):
            raise ValueError(f"unknown partials_mode {self.partials_mode!r}")
        if self.partials_mode == "analytic" and self.analytic is None:
            raise ValueError("analytic partials_mode needs an analytic callable")

    def with_mode(self, mode: str) -> "ConfigurationModel":
        return ConfigurationModel(
            n=self.n,
            lagrangian=self.lagrangian,
            partials_mode=mode,
            analytic=self.analytic,
            metric=self.metric,
            mass=self.mass,
            name=self.name,
            params=self.params,
        )


def _steps(z, rel):
    return rel * np.maximum(1.0, np.abs(z))


def fd_partials(L, s, x, v) -> PartialBundle:
    """All first and second partials of ``L`` by central differences."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = x.size
    z = np.concatenate([x, v])

    def f(zz, ss=s):
        return float(L(ss, zz[:n], zz[n:]))

    h1 = _steps(z, FD_STEP)
    grad = np.empty(2 * n)
    for a in range(2 * n):
        e = np.zeros(2 * n)
        e[a] = h1[a]
        grad[a] = (f(z + e) - f(z - e)) / (2 * h1[a])

    h2 = _steps(z, FD_STEP_SECOND)
    f0 = f(z)
    hess = np.empty((2 * n, 2 * n))
    for a in range(2 * n):
        ea = np.zeros(2 * n)
        ea[a] = h2[a]
        hess[a, a] = (f(z + ea) - 2 * f0 + f(z - ea)) / h2[a] ** 2
        for b in range(a + 1, 2 * n):
            eb = np.zeros(2 * n)
            eb[b] = h2[b]
            val = (
                f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb) + f(z - ea - eb)
            ) / (4 * h2[a] * h2[b])
            hess[a, b] = hess[b, a] = val

    hs = FD_STEP_SECOND * max(1.0, abs(s))
    Lvs = np.empty(n)
    for a in range(n):
        e = np.zeros(2 * n)
        e[n + a] = h2[n + a]
        Lvs[a] = (
            f(z + e, s + hs) - f(z - e, s + hs) - f(z + e, s - hs) + f(z - e, s - hs)
        ) / (4 * h2[n + a] * hs)

    return PartialBundle(
        Lx=grad[:n],
        Lv=grad[n:],
        Lxx=hess[:n, :n],
        Lxv=hess[:n, n:],
        Lvv=hess[n:, n:],
        Lvs=Lvs,
    )


def partials(model: ConfigurationModel, s: float, x, v) -> PartialBundle:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if model.partials_mode == "analytic":
        b = model.analytic(s, x, v)
        b = PartialBundle(*(np.asarray(a, dtype=float) for a in b))
    else:
        b = fd_partials(model.lagrangian, s, x, v)
    for name, arr in zip(PartialBundle._fields, b):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteDerivative(
                f"{name} is not finite at s={s}, x={x}, v={v} ({model.name})"
            )
    return b


class GridPartials(NamedTuple):
    """Partials sampled along every node of a trajectory."""

    Lx: np.ndarray   # (N, n)
    Lv: np.ndarray   # (N, n)
    Lxx: np.ndarray  # (N, n, n)
    Lxv: np.ndarray  # (N, n, n)
    Lvv: np.ndarray  # (N, n, n)
    Lvs: np.ndarray  # (N, n)

    @property
    def Lvx(self) -> np.ndarray:
        return np.swapaxes(self.Lxv, 1, 2)


def partials_along(model: ConfigurationModel, traj: "Trajectory") -> GridPartials:
    rows = [partials(model, s, x, v) for s, x, v in zip(traj.s, traj.x, traj.v)]
    return GridPartials(*(np.array([getattr(r, f) for r in rows]) for f in PartialBundle._fields))


def uniform_grid(T: float, N: int) -> np.ndarray:
    if T <= 0:
        raise ValueError("T must be positive")
    if N < 3 or N % 2 == 0:
        raise ValueError(f"grid size must be odd and >= 3, got {N}")
    i = np.arange(N)
    return -T + 2.0 * T * i / (N - 1)


def trapezoid_weights(N: int, h: float) -> np.ndarray:
    w = np.full(N, h)
    w[0] = w[-1] = 0.5 * h
    return w


def grid_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order central differences along axis 0, one-sided at the ends."""
    return np.gradient(f, h, axis=0, edge_order=2)


def second_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Compact three-point second difference; the end rows are one-sided."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    if f.shape[0] >= 4:
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return out


@dataclass(frozen=True)
class Trajectory:
    """A path sampled on the uniform grid s_i = -T + 2T i/(N-1).

    ``velocity_source`` records whether ``v`` came from an integrator or
    from central differences of ``x``.
    """

    T: float
    x: np.ndarray
    v: np.ndarray
    velocity_source: str = "central"

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] == 1 and np.ndim(self.x) == 1:
            x = x.T
        v = np.asarray(self.v, dtype=float).reshape(x.shape)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        uniform_grid(self.T, x.shape[0])  # validates N
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("trajectory contains non-finite entries")

    @classmethod
    def from_positions(cls, T: float, x, v=None) -> "Trajectory":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        N = x.shape[0]
        h = 2.0 * T / (N - 1)
        if v is None:
            return cls(T, x, grid_derivative(x, h), "central")
        return cls(T, x, np.asarray(v, dtype=float).reshape(x.shape), "stored")

    @classmethod
    def from_function(cls, T: float, N: int, fn, dfn=None) -> "Trajectory":
        s = uniform_grid(T, N)
        x = np.array([np.atleast_1d(fn(si)) for si in s], dtype=float)
        v = None if dfn is None else np.array([np.atleast_1d(dfn(si)) for si in s], dtype=float)
        return cls.from_positions(T, x, v)

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def s(self) -> np.ndarray:
        return uniform_grid(self.T, self.N)

    @property
    def ds(self) -> float:
        return 2.0 * self.T / (self.N - 1)

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.N, self.ds)

    def perturbed(self, eta, lam: float) -> "Trajectory":
        """x + lam*eta with velocities shifted by the central difference of eta."""
        eta = np.asarray(eta, dtype=float).reshape(self.x.shape)
        return Trajectory(
            self.T,
            self.x + lam * eta,
            self.v + lam * grid_derivative(eta, self.ds),
            self.velocity_source,
        )


def interior_max(r: np.ndarray, margin: int = 1) -> float:
    r = np.asarray(r)
    if r.shape[0] <= 2 * margin:
        return 0.0
    return float(np.max(np.abs(r[margin:-margin])))


def el_residual(model: ConfigurationModel, traj: Trajectory, grid: GridPartials | None = None):
    """d/ds(dL/dv) - dL/dx at every node; only interior rows are meaningful."""
    if grid is None:
        grid = partials_along(model, traj)
    return grid_derivative(grid.Lv, traj.ds) - grid.Lx


@dataclass(frozen=True)
class PathFunctional:
    """A = integral of density(s, x, v) over ``support``.

    A single-point support ``(a, a)`` is a delta-like functional: the density
    is evaluated at the grid node nearest ``a`` and weighted by 1/ds, so the
    discrete sum reproduces a unit point evaluation.  ``gradient`` optionally
    returns the exact pair (d density/dx, d density/dv).
    """

    density: Callable[[float, np.ndarray, np.ndarray], float]
    support: tuple[float, float]
    label: str = "A"
    gradient: Optional[Callable[[float, np.ndarray, np.ndarray], tuple]] = None

    def __post_init__(self):
        a, b = (float(t) for t in self.support)
        if a > b:
            raise ValueError(f"support {self.support} is reversed")
        object.__setattr__(self, "support", (a, b))

    @property
    def is_point(self) -> bool:
        return self.support[0] == self.support[1]

    def nodes(self, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices inside the support and the extra node weight factor."""
        a, b = self.support
        T = traj.T
        tol = 1e-12 * max(1.0, T)
        if a < -T - tol or b > T + tol:
            raise SupportOutOfRange(f"{self.label}: support {self.support} not inside [-{T}, {T}]")
        s = traj.s
        if self.is_point:
            k = int(np.argmin(np.abs(s - a)))
            return np.array([k]), np.array([1.0 / traj.ds])
        idx = np.nonzero((s >= a - tol) & (s <= b + tol))[0]
        return idx, np.ones(idx.size)

    def shifted(self, c: float) -> "PathFunctional":
        """The same functional composed with the parameter translation s -> s - c."""
        dens, grad = self.density, self.gradient
        a, b = self.support
        return PathFunctional(
            density=lambda s, x, v: dens(s - c, x, v),
            support=(a + c, b + c),
            label=f"{self.label}@{c:+g}",
            gradient=None if grad is None else (lambda s, x, v: grad(s - c, x, v)),
        )


def _density_partials(func: PathFunctional, s, x, v):
    if func.gradient is not None:
        ax, av = func.gradient(s, x, v)
        return np.asarray(ax, dtype=float), np.asarray(av, dtype=float)
    n = x.size
    z = np.concatenate([x, v])
    h = _steps(z, FD_STEP)
    g = np.empty(2 * n)
    for a in range(2 * n):
        e = np.zeros(2 * n)
        e[a] = h[a]
        g[a] = (func.density(s, *np.split(z + e, 2)) - func.density(s, *np.split(z - e, 2))) / (2 * h[a])
    return g[:n], g[n:]


def functional_value(func: PathFunctional, traj: Trajectory) -> float:
    idx, scale = func.nodes(traj)
    w = traj.weights[idx] * scale
    s = traj.s
    vals = np.array([func.density(s[i], traj.x[i], traj.v[i]) for i in idx], dtype=float)
    return float(np.dot(w, vals))


def functional_gradient(func: PathFunctional, model: ConfigurationModel, traj: Trajectory) -> np.ndarray:
    """Euler-Lagrange derivative dA/dx - d/ds dA/dv sampled on the grid.

    Velocity-dependent densities contribute through a central difference,
    so the result can reach one node past the support.
    """
    if traj.n != model.n:
        raise GridMismatch(f"trajectory dimension {traj.n} != model dimension {model.n}")
    idx, scale = func.nodes(traj)
    s = traj.s
    Ax = np.zeros((traj.N, traj.n))
    Av = np.zeros((traj.N, traj.n))
    for i, c in zip(idx, scale):
        ax, av = _density_partials(func, s[i], traj.x[i], traj.v[i])
        Ax[i] = c * ax
        Av[i] = c * av
    return Ax - grid_derivative(Av, traj.ds)


# -- functional factories ----------------------------------------------------

def bump(s, center, halfwidth):
    """C-infinity bump exp(1 - 1/(1-u^2)) supported on |s - center| < halfwidth."""
    u = (np.asarray(s, dtype=float) - center) / halfwidth
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out if out.ndim else float(out)


def bump_derivative(s, center, halfwidth):
    u = (np.asarray(s, dtype=float) - center) / halfwidth
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui**2)) * (-2 * ui / (1 - ui**2) ** 2) / halfwidth
    return out if out.ndim else float(out)


def point_evaluation(s0: float, component: int = 0, label: str | None = None) -> PathFunctional:
    """The delta-like functional x^component(s0)."""

    def density(s, x, v):
        return float(x[component])

    def gradient(s, x, v):
        gx = np.zeros(x.size)
        gx[component] = 1.0
        return gx, np.zeros(x.size)

    return PathFunctional(density, (s0, s0), label or f"x{component}({s0:g})", gradient)


def polynomial_density(center, halfwidth, lin_x, quad_x, lin_v, label="A") -> PathFunctional:
    """bump(s) * (lin_x.x + 1/2 x.quad_x.x + lin_v.v) with a smooth bump window."""
    lin_x = np.asarray(lin_x, dtype=float)
    quad_x = np.asarray(quad_x, dtype=float)
    quad_x = 0.5 * (quad_x + quad_x.T)
    lin_v = np.asarray(lin_v, dtype=float)

    def density(s, x, v):
        return bump(s, center, halfwidth) * (lin_x @ x + 0.5 * x @ quad_x @ x + lin_v @ v)

    def gradient(s, x, v):
        f = bump(s, center, halfwidth)
        return f * (lin_x + quad_x @ x), f * lin_v

    return PathFunctional(density, (center - halfwidth, center + halfwidth), label, gradient)


def random_density(rng: np.random.Generator, n: int, T: float, label="A") -> PathFunctional:
    """A random smooth compactly supported density for property suites."""
    halfwidth = rng.uniform(0.15, 0.35) * T
    center = rng.uniform(-T + 1.2 * halfwidth, T - 1.2 * halfwidth)
    return polynomial_density(
        center,
        halfwidth,
        rng.normal(size=n),
        rng.normal(size=(n, n)),
        rng.normal(size=n),
        label,
    )

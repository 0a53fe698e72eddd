"""Finite-dimensional Schrodinger dynamics as a first-order Lagrangian system.

The state psi = q + i p is evolved through the real pair x = (q, p) with

    L = 1/2 (q.p' - p.q') + 1/4 x^T Hbar x,

whose Euler-Lagrange equations are 2i psi' = H psi.  ``Hbar`` is the real
form [[S, -K], [K, S]] of H = S + iK.  A Hermitian operator A enters as the
windowed quadratic density w(s) * 1/2 x^T Abar x = w(s) <psi|A|psi> / 2.
With these normalizations the commutator Green matrix is constant,
G = [[0, I], [-I, 0]], and brackets of such functionals reduce to
-1/2 Im <psi0|[A, B]|psi0>, which is p0^T [A, B] q0 for real A, B.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.linalg import expm

from .bracket import BracketContext, bracket_integral, build_context
from .errors import NonHermitian, UnboundedWindow
from .lagrangian import ConfigurationModel, PartialBundle, PathFunctional, Trajectory, bump, point_evaluation

HERMITIAN_TOL = 1e-12


def _check_hermitian(A, what="matrix") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonHermitian(f"{what} must be square, got shape {A.shape}")
    if np.max(np.abs(A - A.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.max(np.abs(A))):
        raise NonHermitian(f"{what} is not Hermitian")
    return A


def realify(A) -> np.ndarray:
    """Real 2d x 2d matrix acting on (Re psi, Im psi) like A acts on psi."""
    A = np.asarray(A, dtype=complex)
    S, K = A.real, A.imag
    return np.block([[S, -K], [K, S]])


@dataclass(frozen=True)
class HilbertModel:
    H: np.ndarray
    q0: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "H", _check_hermitian(self.H, "Hamiltonian"))
        q0 = np.asarray(self.q0, dtype=float).ravel()
        p0 = np.asarray(self.p0, dtype=float).ravel()
        if q0.shape != (self.d,) or p0.shape != (self.d,):
            raise ValueError(f"q0 and p0 must have length {self.d}")
        if not (np.all(np.isfinite(q0)) and np.all(np.isfinite(p0))):
            raise ValueError("initial state is not finite")
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "p0", p0)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def psi0(self) -> np.ndarray:
        return self.q0 + 1j * self.p0

    @property
    def x0(self) -> np.ndarray:
        return np.concatenate([self.q0, self.p0])

    def propagator(self, s: float) -> np.ndarray:
        """U(s) = exp(-i H s / 2)."""
        return expm(-0.5j * s * self.H)

    def with_hamiltonian(self, H) -> "HilbertModel":
        return HilbertModel(H, self.q0, self.p0)


def canonical_model(hm: HilbertModel) -> ConfigurationModel:
    d = hm.d
    Hb = realify(hm.H)
    Lxv = np.zeros((2 * d, 2 * d))
    Lxv[:d, d:] = 0.5 * np.eye(d)
    Lxv[d:, :d] = -0.5 * np.eye(d)
    zero = np.zeros((2 * d, 2 * d))

    def lagrangian(s, x, v):
        q, p = x[:d], x[d:]
        qd, pd = v[:d], v[d:]
        return 0.5 * (q @ pd - p @ qd) + 0.25 * x @ Hb @ x

    def analytic(s, x, v):
        q, p = x[:d], x[d:]
        Lx = 0.5 * np.concatenate([v[d:], -v[:d]]) + 0.5 * Hb @ x
        Lv = 0.5 * np.concatenate([-p, q])
        return PartialBundle(Lx, Lv, 0.5 * Hb, Lxv, zero, np.zeros(2 * d))

    return ConfigurationModel(2 * d, lagrangian, "analytic", analytic, None, 1.0, "qm", {"d": d})


def reference_trajectory(hm: HilbertModel, T: float = 1.0, N: int = 201) -> Trajectory:
    """Exact solution with psi(0) = psi0 sampled on [-T, T]."""
    s = np.linspace(-T, T, N)
    psi = np.array([hm.propagator(si) @ hm.psi0 for si in s])
    dpsi = -0.5j * psi @ hm.H.T
    x = np.concatenate([psi.real, psi.imag], axis=1)
    v = np.concatenate([dpsi.real, dpsi.imag], axis=1)
    return Trajectory(T, x, v, "stored")


@dataclass(frozen=True)
class Window:
    """Smooth compactly supported time weight with total mass ``mass``."""

    center: float
    halfwidth: float
    mass: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.center) and np.isfinite(self.halfwidth)) or self.halfwidth <= 0:
            raise UnboundedWindow(
                f"window at {self.center} with half-width {self.halfwidth} has no compact support"
            )

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    @cached_property
    def _norm(self) -> float:
        val, _ = quad(lambda t: bump(t, self.center, self.halfwidth), *self.support, epsabs=1e-15, epsrel=1e-13)
        return val

    def __call__(self, t):
        return self.mass * bump(t, self.center, self.halfwidth) / self._norm


@dataclass(frozen=True)
class QuadraticFunctional:
    A: np.ndarray
    window: Window
    label: str = "A"

    def __post_init__(self):
        object.__setattr__(self, "A", _check_hermitian(self.A, self.label))
        if not isinstance(self.window, Window):
            raise UnboundedWindow(f"{self.label}: a compactly supported Window is required")

    def as_path_functional(self) -> PathFunctional:
        Ab = realify(self.A)
        w = self.window
        norm = w._norm
        a, h = w.center, w.halfwidth

        def weight(s):
            return w.mass * bump(s, a, h) / norm

        def density(s, x, v):
            return weight(s) * 0.5 * float(x @ Ab @ x)

        def gradient(s, x, v):
            return weight(s) * (Ab @ x), np.zeros_like(v)

        return PathFunctional(density, w.support, self.label, gradient)


def commutator_expectation(psi, A, B) -> complex:
    return complex(np.vdot(psi, (A @ B - B @ A) @ psi))


def free_commutator_bracket(hm: HilbertModel, A, B) -> float:
    """-1/2 Im <psi0|[A, B]|psi0>; equals p0^T [A, B] q0 when A and B are real."""
    A = _check_hermitian(A, "A")
    B = _check_hermitian(B, "B")
    return float(-0.5 * commutator_expectation(hm.psi0, A, B).imag)


def pipeline_context(hm: HilbertModel, T: float = 1.0, N: int = 201) -> BracketContext:
    return build_context(canonical_model(hm), reference_trajectory(hm, T, N))


def pipeline_bracket(ctx: BracketContext, A: QuadraticFunctional, B: QuadraticFunctional) -> float:
    """Peierls bracket from the generic Jacobi/kernel/response pipeline."""
    return bracket_integral(ctx, A.as_path_functional(), B.as_path_functional())


def bivector_coefficients(ctx: BracketContext) -> np.ndarray:
    """Lambda_ab = {x^a(0), x^b(0)} from point-evaluation functionals at s = 0."""
    n = ctx.traj.n
    pts = [point_evaluation(0.0, a) for a in range(n)]
    return np.array([[bracket_integral(ctx, pts[a], pts[b]) for b in range(n)] for a in range(n)])


def canonical_matrix(d: int) -> np.ndarray:
    """{p^j, q^k} = delta^{jk} in (q, p) ordering."""
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, -I], [I, Z]])


def canonical_bivector_check(hm: HilbertModel, T: float = 1.0, N: int = 201) -> float:
    """Max deviation of the pipeline bivector from the canonical one, with H = 0."""
    free = hm.with_hamiltonian(np.zeros((hm.d, hm.d)))
    lam = bivector_coefficients(pipeline_context(free, T, N))
    return float(np.max(np.abs(lam - canonical_matrix(hm.d))))


def heisenberg_operator(hm: HilbertModel, F: QuadraticFunctional) -> np.ndarray:
    """Integral of w(t) U(t)^dagger A U(t) over the window."""
    w = F.window

    def integrand(t):
        U = hm.propagator(t)
        return w(t) * (U.conj().T @ F.A @ U)

    val, _ = quad_vec(integrand, *w.support, epsabs=1e-14, epsrel=1e-12)
    return val


def heisenberg_bracket_complex(hm: HilbertModel, A: QuadraticFunctional, B: QuadraticFunctional) -> complex:
    """(i/2) double integral of w_A w_B <psi0|[A_H(tau), B_H(t)]|psi0>."""
    return 0.5j * commutator_expectation(hm.psi0, heisenberg_operator(hm, A), heisenberg_operator(hm, B))


def heisenberg_bracket(hm: HilbertModel, A: QuadraticFunctional, B: QuadraticFunctional) -> float:
    return float(heisenberg_bracket_complex(hm, A, B).real)


def unitarity_drift(hm: HilbertModel, window: Window, samples: int = 101) -> float:
    """Max | |U(t) psi0|^2 - |psi0|^2 | over the window."""
    t = np.linspace(*window.support, samples)
    n0 = np.vdot(hm.psi0, hm.psi0).real
    norms = [np.linalg.norm(hm.propagator(ti) @ hm.psi0) ** 2 for ti in t]
    return float(np.max(np.abs(np.array(norms) - n0)))


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (Z + Z.conj().T)

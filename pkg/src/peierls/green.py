"""Homogeneous Jacobi basis, commutator kernel and retarded/advanced responses.

All propagation goes through one discrete linear flow: per-step RK4
propagators of the first-order system for (J, J') (or for J alone when the
Lagrangian is linear in velocities).  Grid-sampled sources act as impulses
at the nodes carrying their trapezoid weights, so the time-stepped
responses and the kernel contraction discretize the same integral.

Kernel convention: G(s, s') = X(s) Omega^{-1} X(s')^T, where the columns
of X span the homogeneous solutions and Omega is their omega_L pairing.
For the unit-endpoint basis this is the separable sum over rho with
weight -1/W_rho, W_rho = omega_L(J+^(rho), J-^(rho)); the sign makes G the
retarded-minus-advanced kernel, e.g. G(s, s') = s - s' for a free particle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ConjugateEndpoints,
    DegenerateWronskian,
    GridMismatch,
    SingularLvv,
    SupportTouchesBoundary,
)
from .jacobi import JacobiCoefficients, coefficients
from .lagrangian import ConfigurationModel, GridPartials, Trajectory, grid_derivative, partials

CONJUGATE_TOL = 1e-6
WRONSKIAN_TOL = 1e-10


def _spline_coefficients(grid: GridPartials, s: np.ndarray, t: np.ndarray):
    """C, D, E at the points ``t`` from cubic splines of the sampled partials.

    The s-derivatives are those of the splines themselves, so the propagated
    system is the exact linearization of an interpolated quadratic
    Lagrangian and conserves omega_L up to the integrator error.
    """
    Svv = CubicSpline(s, grid.Lvv, axis=0)
    Svx = CubicSpline(s, grid.Lvx, axis=0)
    Sxx = CubicSpline(s, grid.Lxx, axis=0)
    Lvx = Svx(t)
    C = -Svv(t)
    D = -Svv.derivative()(t) - Lvx + np.swapaxes(Lvx, 1, 2)
    E = -Svx.derivative()(t) + Sxx(t)
    return C, D, E


class LinearFlow:
    """Discrete flow of the homogeneous Jacobi equation on the trajectory grid."""

    def __init__(self, coeffs: JacobiCoefficients):
        traj = coeffs.traj
        self.coeffs = coeffs
        self.N = traj.N
        self.n = traj.n
        self.h = traj.ds
        self.s = traj.s
        self.first_order = coeffs.first_order
        n = self.n
        s = self.s
        C, D, E = _spline_coefficients(coeffs.grid, s, s)
        Cm, Dm, Em = _spline_coefficients(coeffs.grid, s, 0.5 * (s[1:] + s[:-1]))

        if self.first_order:
            self.m = n
            gen = self._generator_first(D, E)
            gen_mid = self._generator_first(Dm, Em)
            self.kick = -np.linalg.inv(D)
        else:
            self.m = 2 * n
            gen = self._generator_second(C, D, E)
            gen_mid = self._generator_second(Cm, Dm, Em)
            kick = np.zeros((self.N, 2 * n, n))
            kick[:, n:, :] = -np.linalg.inv(C)
            self.kick = kick
        self.generator = gen

        h = self.h
        I = np.eye(self.m)
        A0, Am, A1 = gen[:-1], gen_mid, gen[1:]
        K1 = A0
        K2 = Am @ (I + 0.5 * h * K1)
        K3 = Am @ (I + 0.5 * h * K2)
        K4 = A1 @ (I + h * K3)
        self.P = I + h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)
        self.Pinv = np.linalg.inv(self.P)

    @staticmethod
    def _check_invertible(M, what):
        dets = np.abs(np.linalg.det(M))
        if np.any(dets < 1e-12):
            raise SingularLvv(f"{what} is singular along the reference solution")

    def _generator_first(self, D, E):
        self._check_invertible(D, "D (first-order Jacobi operator)")
        return -np.linalg.solve(D, E)

    def _generator_second(self, C, D, E):
        self._check_invertible(C, "C = -Lvv")
        n = C.shape[-1]
        A = np.zeros(C.shape[:-2] + (2 * n, 2 * n))
        A[..., :n, n:] = np.eye(n)
        A[..., n:, :n] = -np.linalg.solve(C, E)
        A[..., n:, n:] = -np.linalg.solve(C, D)
        return A

    def propagate(self, y_ref: np.ndarray, ref: int = 0) -> np.ndarray:
        """States at every node of the homogeneous solution through ``y_ref`` at node ``ref``.

        ``y_ref`` may carry extra trailing columns (a matrix of initial states).
        """
        y_ref = np.asarray(y_ref, dtype=float)
        out = np.empty((self.N,) + y_ref.shape)
        out[ref] = y_ref
        for i in range(ref, self.N - 1):
            out[i + 1] = self.P[i] @ out[i]
        for i in range(ref, 0, -1):
            out[i - 1] = self.Pinv[i - 1] @ out[i]
        return out

    def fundamental(self, ref: int = 0) -> np.ndarray:
        return self.propagate(np.eye(self.m), ref)

    def config(self, states: np.ndarray) -> np.ndarray:
        return states[:, : self.n]

    def velocity(self, states: np.ndarray) -> np.ndarray:
        if self.first_order:
            return np.einsum("imn,in...->im...", self.generator, states)
        return states[:, self.n:]


def omega_profile(grid: GridPartials, J1, dJ1, J2, dJ2) -> np.ndarray:
    """omega_L((J1, J1'), (J2, J2')) at every node."""
    A = grid.Lvx - grid.Lxv
    return (
        np.einsum("im,imn,in->i", J1, grid.Lvv, dJ2)
        - np.einsum("im,imn,in->i", J2, grid.Lvv, dJ1)
        + np.einsum("im,imn,in->i", J1, A, J2)
    )


def two_form(model: ConfigurationModel, traj: Trajectory, i: int, J1, J2, dJ1=None, dJ2=None) -> float:
    """omega_L = J1.Lvv.J2' - J2.Lvv.J1' + J1.(Lvx - Lxv).J2 at node ``i``.

    Velocities default to central differences; pass integrator velocities
    when the fields come from the flow.
    """
    shape = traj.x.shape
    J1 = np.asarray(J1, dtype=float).reshape(-1, traj.n)
    J2 = np.asarray(J2, dtype=float).reshape(-1, traj.n)
    if J1.shape != shape or J2.shape != shape:
        raise GridMismatch(f"fields must have shape {shape}")
    h = traj.ds
    dJ1 = grid_derivative(J1, h) if dJ1 is None else np.asarray(dJ1, dtype=float).reshape(shape)
    dJ2 = grid_derivative(J2, h) if dJ2 is None else np.asarray(dJ2, dtype=float).reshape(shape)
    b = partials(model, traj.s[i], traj.x[i], traj.v[i])
    return float(
        J1[i] @ b.Lvv @ dJ2[i] - J2[i] @ b.Lvv @ dJ1[i] + J1[i] @ (b.Lvx - b.Lxv) @ J2[i]
    )


@dataclass(frozen=True)
class JacobiBasis:
    """Homogeneous solutions X[a] (with velocities dX[a]) and their pairing.

    Second-order case: a = 0..n-1 are J+^(rho) (J(T) = e_rho, J(-T) = 0) and
    a = n..2n-1 are J-^(rho) (J(-T) = e_rho, J(T) = 0).  First-order case:
    a = 0..n-1 are the solutions with unit data at s = 0.
    """

    X: np.ndarray
    dX: np.ndarray
    pairing: np.ndarray
    pairing_drift: float
    first_order: bool
    s: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[2]

    @property
    def Jplus(self) -> np.ndarray:
        return self.X[: self.n]

    @property
    def Jminus(self) -> np.ndarray:
        return self.X[self.n:]

    @property
    def W(self) -> np.ndarray:
        """W_rho = omega_L(J+^(rho), J-^(rho)) for the unit-endpoint basis."""
        if self.first_order:
            raise AttributeError("a first-order basis has no J+/J- pairing")
        n = self.n
        return np.array([self.pairing[r, n + r] for r in range(n)])

    def inverse_pairing(self) -> np.ndarray:
        if not self.first_order:
            W = self.W
            if np.any(np.abs(W) < WRONSKIAN_TOL):
                raise DegenerateWronskian(f"Wronskians {W} are degenerate")
        sv = np.linalg.svd(self.pairing, compute_uv=False)
        if sv[-1] < WRONSKIAN_TOL * max(1.0, sv[0]):
            raise DegenerateWronskian("omega_L pairing of the basis is singular")
        K = np.linalg.inv(self.pairing)
        return 0.5 * (K - K.T)


def solve_basis(model: ConfigurationModel, traj: Trajectory, coeffs: JacobiCoefficients | None = None,
                flow: LinearFlow | None = None, conjugate_tol: float = CONJUGATE_TOL) -> JacobiBasis:
    if coeffs is None:
        coeffs = coefficients(model, traj)
    if flow is None:
        flow = LinearFlow(coeffs)
    n, N = flow.n, flow.N
    mid = (N - 1) // 2

    if flow.first_order:
        Phi = flow.fundamental(mid)
    else:
        Phi0 = flow.fundamental(0)
        PhiT = Phi0[-1]
        Pxx, Pxv = PhiT[:n, :n], PhiT[:n, n:]
        sv = np.linalg.svd(Pxv, compute_uv=False)
        if sv[-1] / np.linalg.norm(PhiT, 2) < conjugate_tol:
            raise ConjugateEndpoints(
                f"s = -{traj.T} and s = {traj.T} are conjugate: the homogeneous "
                "two-point problem has a nontrivial solution"
            )
        Pxv_inv = np.linalg.inv(Pxv)
        Y0 = np.zeros((2 * n, 2 * n))
        Y0[n:, :n] = Pxv_inv
        Y0[:n, n:] = np.eye(n)
        Y0[n:, n:] = -Pxv_inv @ Pxx
        Phi = Phi0 @ Y0

    X = np.moveaxis(flow.config(Phi), 2, 0)           # (m, N, n)
    dX = np.moveaxis(flow.velocity(Phi), 2, 0)
    grid = coeffs.grid
    A = grid.Lvx - grid.Lxv
    Om = (
        np.einsum("aim,imn,bin->iab", X, grid.Lvv, dX)
        - np.einsum("bim,imn,ain->iab", X, grid.Lvv, dX)
        + np.einsum("aim,imn,bin->iab", X, A, X)
    )
    pairing = Om[mid]
    scale = np.max(np.abs(pairing))
    drift = float(np.max(np.abs(Om - pairing)) / scale) if scale > 0 else np.inf
    return JacobiBasis(X, dX, pairing, drift, flow.first_order, traj.s)


@dataclass(frozen=True)
class CommutatorKernel:
    G: np.ndarray  # (N, n, N, n)
    s: np.ndarray

    def max_deviation(self, fn) -> float:
        """Max |G - fn(s, s')| for a scalar-per-block reference fn(s_i, s_j) -> (n, n)."""
        N, n = self.G.shape[0], self.G.shape[1]
        S, Sp = np.meshgrid(self.s, self.s, indexing="ij")
        ref = np.asarray(fn(S, Sp))
        if ref.ndim == 2:
            ref = ref[:, None, :, None] * np.eye(n)[None, :, None, :]
        return float(np.max(np.abs(self.G - ref)))


def commutator_kernel(basis: JacobiBasis, model: ConfigurationModel | None = None,
                      traj: Trajectory | None = None) -> CommutatorKernel:
    K = basis.inverse_pairing()
    G = np.einsum("aim,ab,bjn->imjn", basis.X, K, basis.X)
    return CommutatorKernel(G, basis.s)


def kernel_apply(basis: JacobiBasis, source: np.ndarray, weights: np.ndarray):
    """Contract the commutator kernel with a grid source; returns (field, velocity)."""
    K = basis.inverse_pairing()
    c = np.einsum("aim,im,i->a", basis.X, source, weights)
    coef = K @ c
    return np.einsum("aim,a->im", basis.X, coef), np.einsum("aim,a->im", basis.dX, coef)


def response_states(flow: LinearFlow, source: np.ndarray, weights: np.ndarray, direction: str) -> np.ndarray:
    """Time-stepped solution of L J = -source with zero data before/after the support.

    Node states are right limits: the impulse at node i is already included
    for the retarded solution and not yet removed for the advanced one.
    """
    source = np.asarray(source, dtype=float).reshape(flow.N, flow.n)
    if np.any(source[0] != 0) or np.any(source[-1] != 0):
        raise SupportTouchesBoundary("source must vanish at both ends of the interval")
    imp = source * weights[:, None]
    active = np.any(imp != 0, axis=1)
    out = np.empty((flow.N, flow.m))
    y = np.zeros(flow.m)
    if direction == "retarded":
        for i in range(flow.N):
            if active[i]:
                y = y + flow.kick[i] @ imp[i]
            out[i] = y
            if i < flow.N - 1:
                y = flow.P[i] @ y
    elif direction == "advanced":
        for i in range(flow.N - 1, -1, -1):
            out[i] = y
            if active[i]:
                y = y - flow.kick[i] @ imp[i]
            if i > 0:
                y = flow.Pinv[i - 1] @ y
    else:
        raise ValueError(f"direction must be 'retarded' or 'advanced', not {direction!r}")
    return out


def response(model: ConfigurationModel, traj: Trajectory, coeffs: JacobiCoefficients | None,
             source, direction: str, flow: LinearFlow | None = None) -> np.ndarray:
    if flow is None:
        flow = LinearFlow(coeffs if coeffs is not None else coefficients(model, traj))
    states = response_states(flow, source, traj.weights, direction)
    return flow.config(states).copy()

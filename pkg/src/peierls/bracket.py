"""Peierls brackets of path functionals.

Three routes are provided and cross-checked:

* ``bracket_integral``: integral of (delta+_A - delta-_A) . eps_B over the grid,
* ``bracket_omega``: omega_L(G eps_A, G eps_B) on one slice,
* ``bracket_bivector``: <X, eps_B>^T Omega^{-1} <X, eps_A> from the basis.

Here G eps = retarded - advanced response to the source eps.  For the free
particle {x(s1), x(s2)} = s2 - s1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elsolver import BoundaryData, solve_bvp
from .green import (
    CommutatorKernel,
    JacobiBasis,
    LinearFlow,
    commutator_kernel,
    omega_profile,
    response_states,
    solve_basis,
)
from .jacobi import JacobiCoefficients, coefficients
from .lagrangian import (
    ConfigurationModel,
    PathFunctional,
    Trajectory,
    functional_gradient,
    functional_value,
)


@dataclass
class BracketContext:
    """Validated artifacts built from one model and one reference solution."""

    model: ConfigurationModel
    traj: Trajectory
    coeffs: JacobiCoefficients
    flow: LinearFlow
    basis: JacobiBasis
    _kernel: CommutatorKernel | None = None

    @property
    def kernel(self) -> CommutatorKernel:
        if self._kernel is None:
            self._kernel = commutator_kernel(self.basis)
        return self._kernel

    def source(self, F) -> np.ndarray:
        """Euler-Lagrange derivative of a functional, or a raw grid source passed through."""
        if isinstance(F, PathFunctional):
            return functional_gradient(F, self.model, self.traj)
        src = np.asarray(F, dtype=float)
        return src.reshape(self.traj.N, self.traj.n)

    def commutator_states(self, F) -> np.ndarray:
        """States of G eps_F (retarded minus advanced) at every node."""
        eps = self.source(F)
        w = self.traj.weights
        return response_states(self.flow, eps, w, "retarded") - response_states(self.flow, eps, w, "advanced")


def build_context(model: ConfigurationModel, traj: Trajectory) -> BracketContext:
    coeffs = coefficients(model, traj)
    flow = LinearFlow(coeffs)
    basis = solve_basis(model, traj, coeffs, flow)
    return BracketContext(model, traj, coeffs, flow, basis)


def bracket_integral(ctx: BracketContext, A, B) -> float:
    states = ctx.commutator_states(A)
    dA = ctx.flow.config(states)
    eps_B = ctx.source(B)
    return float(np.einsum("i,im,im->", ctx.traj.weights, dA, eps_B))


def omega_bracket_profile(ctx: BracketContext, A, B) -> np.ndarray:
    """omega_L(G eps_A, G eps_B) at every grid node."""
    sa = ctx.commutator_states(A)
    sb = ctx.commutator_states(B)
    fl = ctx.flow
    return omega_profile(ctx.coeffs.grid, fl.config(sa), fl.velocity(sa), fl.config(sb), fl.velocity(sb))


def bracket_omega(ctx: BracketContext, A, B, i: int | None = None) -> float:
    if i is None:
        i = (ctx.traj.N - 1) // 2
    return float(omega_bracket_profile(ctx, A, B)[i])


def conservation_spread(profile: np.ndarray, floor: float = 0.0) -> float:
    """max |omega(s_i) - median| relative to max(|median|, floor)."""
    med = float(np.median(profile))
    scale = max(abs(med), floor)
    dev = float(np.max(np.abs(profile - med)))
    if scale == 0.0:
        return 0.0 if dev == 0.0 else np.inf
    return dev / scale


def basis_projection(ctx: BracketContext, F) -> np.ndarray:
    """<X_a, eps_F> for every basis solution, by trapezoid quadrature."""
    return np.einsum("aim,im,i->a", ctx.basis.X, ctx.source(F), ctx.traj.weights)


def bracket_bivector(ctx: BracketContext, A, B) -> float:
    K = ctx.basis.inverse_pairing()
    return float(basis_projection(ctx, B) @ K @ basis_projection(ctx, A))


def relative_gap(a: float, b: float, floor: float = 0.0) -> float:
    scale = max(abs(a), abs(b), floor)
    return 0.0 if scale == 0.0 else abs(a - b) / scale


# -- boundary-data chart -------------------------------------------------------

def action(model: ConfigurationModel, traj: Trajectory) -> float:
    vals = np.array([model.lagrangian(s, x, v) for s, x, v in zip(traj.s, traj.x, traj.v)])
    return float(np.dot(traj.weights, vals))


def hamilton_principal(model: ConfigurationModel, x_minus, x_plus, T: float, N: int) -> float:
    """Action of the solution from x_minus at -T to x_plus at T."""
    traj = solve_bvp(model, BoundaryData(x_minus, x_plus, T, N))
    return action(model, traj)


def principal_mixed_hessian(model: ConfigurationModel, x_minus, x_plus, T: float, N: int,
                            step: float = 1e-3) -> np.ndarray:
    """d^2 S / dx_plus^rho dx_minus^sigma by central differences."""
    xm = np.atleast_1d(np.asarray(x_minus, dtype=float))
    xp = np.atleast_1d(np.asarray(x_plus, dtype=float))
    n = xm.size
    out = np.empty((n, n))
    for r in range(n):
        for c in range(n):
            er = np.zeros(n)
            er[r] = step
            ec = np.zeros(n)
            ec[c] = step
            vals = [
                hamilton_principal(model, xm + sc * ec, xp + sr * er, T, N)
                for sr, sc in ((1, 1), (1, -1), (-1, 1), (-1, -1))
            ]
            out[r, c] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * step**2)
    return out


def chart_pairing(model: ConfigurationModel, x_minus, x_plus, T: float, N: int, step: float = 1e-3) -> np.ndarray:
    """omega_L pairing of the chart vectors d/dx_plus, d/dx_minus generated by S.

    Ordered like the unit-endpoint basis (J+ first); it should equal the
    basis pairing on the reference solution through (x_minus, x_plus).
    """
    Spm = principal_mixed_hessian(model, x_minus, x_plus, T, N, step)
    n = Spm.shape[0]
    Om = np.zeros((2 * n, 2 * n))
    Om[:n, n:] = Spm
    Om[n:, :n] = -Spm.T
    return Om


class _ChartFunctions:
    """Functionals as functions of the boundary data z = (x_plus, x_minus)."""

    def __init__(self, model, T, N, functionals):
        self.model = model
        self.T = T
        self.N = N
        self.functionals = functionals
        self.cache: dict[tuple, np.ndarray] = {}

    def __call__(self, z: np.ndarray) -> np.ndarray:
        key = tuple(np.round(z, 14))
        if key not in self.cache:
            n = self.model.n
            traj = solve_bvp(self.model, BoundaryData(z[n:], z[:n], self.T, self.N))
            self.cache[key] = np.array([functional_value(F, traj) for F in self.functionals])
        return self.cache[key]


def jacobi_identity_residual(ctx: BracketContext, A: PathFunctional, B: PathFunctional,
                             C: PathFunctional, step: float = 1e-4) -> float:
    """|{A,{B,C}} + {B,{C,A}} + {C,{A,B}}| in the boundary-data chart.

    The bivector is the constant Omega^{-1} of the reference basis; the
    functionals are re-evaluated on solutions with perturbed boundary data.
    """
    traj = ctx.traj
    z0 = np.concatenate([traj.x[-1], traj.x[0]])
    m = z0.size
    f = _ChartFunctions(ctx.model, traj.T, traj.N, [A, B, C])
    K = ctx.basis.inverse_pairing()
    h = step * np.maximum(1.0, np.abs(z0))
    E = np.diag(h)

    f0 = f(z0)
    grad = np.empty((3, m))
    hess = np.empty((3, m, m))
    for a in range(m):
        fp, fm = f(z0 + E[a]), f(z0 - E[a])
        grad[:, a] = (fp - fm) / (2 * h[a])
        hess[:, a, a] = (fp - 2 * f0 + fm) / h[a] ** 2
        for b in range(a + 1, m):
            v = (f(z0 + E[a] + E[b]) - f(z0 + E[a] - E[b]) - f(z0 - E[a] + E[b]) + f(z0 - E[a] - E[b])) / (
                4 * h[a] * h[b]
            )
            hess[:, a, b] = hess[:, b, a] = v

    def bracket_grad(i, j):
        # gradient of {F_i, F_j} = grad F_j . K . grad F_i
        return hess[j] @ K @ grad[i] + hess[i] @ K.T @ grad[j]

    def outer(i, j, k):
        # {F_i, {F_j, F_k}}
        return bracket_grad(j, k) @ K @ grad[i]

    return float(abs(outer(0, 1, 2) + outer(1, 2, 0) + outer(2, 0, 1)))


def bracket_table(ctx: BracketContext, functionals: list[PathFunctional]) -> list[tuple[str, str, str, float]]:
    """(A-label, B-label, route, value) for every ordered pair and all three routes."""
    rows = []
    for A in functionals:
        for B in functionals:
            rows.append((A.label, B.label, "integral", bracket_integral(ctx, A, B)))
            rows.append((A.label, B.label, "omega", bracket_omega(ctx, A, B)))
            rows.append((A.label, B.label, "bivector", bracket_bivector(ctx, A, B)))
    return rows


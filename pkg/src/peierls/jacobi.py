"""Linearized (small-perturbation) operator along a reference solution.

The operator is L = C d^2/ds^2 + D d/ds + E with

    C = -Lvv
    D = -d/ds Lvv - Lvx + Lxv
    E = -d/ds Lvx + Lxx

acting on a perturbation J; a functional with Euler-Lagrange derivative
eps perturbs the reference solution by L J = -eps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, MissingMetric, NotASolution
from .lagrangian import (
    ConfigurationModel,
    GridPartials,
    Trajectory,
    el_residual,
    grid_derivative,
    interior_max,
    partials_along,
    second_derivative,
)

ON_SHELL_TOL = 1e-4


@dataclass(frozen=True)
class JacobiCoefficients:
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    traj: Trajectory
    grid: GridPartials

    @property
    def first_order(self) -> bool:
        """True when the Lagrangian is linear in velocities (C vanishes identically)."""
        scale = 1.0 + np.max(np.abs(self.D))
        return bool(np.max(np.abs(self.C)) <= 1e-13 * scale)


def coefficients(model: ConfigurationModel, traj: Trajectory, tol: float = ON_SHELL_TOL) -> JacobiCoefficients:
    grid = partials_along(model, traj)
    res = interior_max(el_residual(model, traj, grid))
    if res > tol:
        raise NotASolution(
            f"trajectory violates the Euler-Lagrange equations (residual {res:.3e} > {tol:g})"
        )
    h = traj.ds
    C = -grid.Lvv
    D = -grid_derivative(grid.Lvv, h) - grid.Lvx + grid.Lxv
    E = -grid_derivative(grid.Lvx, h) + grid.Lxx
    return JacobiCoefficients(C, D, E, traj, grid)


def _check_grid(coeffs: JacobiCoefficients, J):
    J = np.asarray(J, dtype=float)
    if J.ndim == 1:
        J = J[:, None]
    if J.shape != (coeffs.traj.N, coeffs.traj.n):
        raise GridMismatch(f"field of shape {J.shape} does not match grid {(coeffs.traj.N, coeffs.traj.n)}")
    return J


def apply_operator(coeffs: JacobiCoefficients, J) -> np.ndarray:
    """(C J'' + D J' + E J) with second-order stencils; end rows are unreliable."""
    J = _check_grid(coeffs, J)
    h = coeffs.traj.ds
    d1 = grid_derivative(J, h)
    d2 = second_derivative(J, h)
    return (
        np.einsum("imn,in->im", coeffs.C, d2)
        + np.einsum("imn,in->im", coeffs.D, d1)
        + np.einsum("imn,in->im", coeffs.E, J)
    )


def covariant_jacobi(model: ConfigurationModel, traj: Trajectory, J) -> np.ndarray:
    """nabla^2 J/ds^2 + R(J, x')x' along ``traj`` from the metric data."""
    metric = model.metric
    if metric is None:
        raise MissingMetric(f"model {model.name!r} carries no metric")
    J = np.asarray(J, dtype=float).reshape(traj.x.shape)
    h = traj.ds
    v = traj.v
    Gam = np.array([metric.christoffel(x) for x in traj.x])
    Riem = np.array([metric.riemann(x) for x in traj.x])
    dJ = grid_derivative(J, h)
    d2J = second_derivative(J, h)
    # M^mu_rho = Gamma^mu_{nu rho} x'^nu, so nabla J = J' + M J
    M = np.einsum("imnr,in->imr", Gam, v)
    dM = grid_derivative(M, h)
    nablaJ = dJ + np.einsum("imr,ir->im", M, J)
    nabla2 = d2J + np.einsum("imr,ir->im", dM, J) + np.einsum("imr,ir->im", M, dJ) + np.einsum(
        "imr,ir->im", M, nablaJ
    )
    curv = np.einsum("imnrs,in,ir,is->im", Riem, v, J, v)
    return nabla2 + curv


def covariant_jacobi_check(model: ConfigurationModel, traj: Trajectory, J,
                           coeffs: JacobiCoefficients | None = None, margin: int = 2) -> float:
    """Max interior deviation between -g^{-1} L J / m and the covariant Jacobi operator."""
    if model.metric is None:
        raise MissingMetric(f"model {model.name!r} carries no metric")
    if coeffs is None:
        coeffs = coefficients(model, traj)
    LJ = apply_operator(coeffs, J)
    ginv = np.array([np.linalg.inv(model.metric.g(x)) for x in traj.x])
    lhs = -np.einsum("imn,in->im", ginv, LJ) / model.mass
    rhs = covariant_jacobi(model, traj, J)
    return interior_max(lhs - rhs, margin)

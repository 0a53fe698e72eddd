"""Reference solutions of the Euler-Lagrange equations.

Initial-value problems are integrated with classical RK4 on the uniform
grid; boundary-value problems are solved by shooting on the initial
velocity with damped Newton iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, ConjugatePoint, NoConvergence, SingularLvv
from .lagrangian import ConfigurationModel, Trajectory, partials, uniform_grid

SINGULAR_LVV = 1e-12
BLOWUP_NORM = 1e12
# normalized shooting-Jacobian threshold; RK4 truncation at desk-scale grids
# leaves ~1e-8 where the exact Jacobian vanishes, so 1e-10 would never fire
CONJUGATE_TOL = 1e-6


@dataclass(frozen=True)
class BoundaryData:
    x_minus: np.ndarray
    x_plus: np.ndarray
    T: float
    N: int

    def __post_init__(self):
        object.__setattr__(self, "x_minus", np.atleast_1d(np.asarray(self.x_minus, dtype=float)))
        object.__setattr__(self, "x_plus", np.atleast_1d(np.asarray(self.x_plus, dtype=float)))
        uniform_grid(self.T, self.N)
        if self.x_minus.shape != self.x_plus.shape:
            raise ValueError("boundary values differ in dimension")


def acceleration(model: ConfigurationModel, s, x, v):
    b = partials(model, s, x, v)
    if abs(np.linalg.det(b.Lvv)) < SINGULAR_LVV:
        raise SingularLvv(f"d2L/dv2 is singular at s={s} ({model.name})")
    return np.linalg.solve(b.Lvv, b.Lx - b.Lvx @ v - b.Lvs)


def _rk4(model, x0, v0, T, N):
    s = uniform_grid(T, N)
    h = s[1] - s[0]
    n = model.n
    X = np.empty((N, n))
    V = np.empty((N, n))
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    X[0], V[0] = x, v
    for i in range(N - 1):
        si = s[i]
        k1x, k1v = v, acceleration(model, si, x, v)
        k2x = v + 0.5 * h * k1v
        k2v = acceleration(model, si + 0.5 * h, x + 0.5 * h * k1x, k2x)
        k3x = v + 0.5 * h * k2v
        k3v = acceleration(model, si + 0.5 * h, x + 0.5 * h * k2x, k3x)
        k4x = v + h * k3v
        k4v = acceleration(model, si + h, x + h * k3x, k4x)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))) or max(
            np.max(np.abs(x)), np.max(np.abs(v))
        ) > BLOWUP_NORM:
            raise BlowUp(f"state norm exceeded {BLOWUP_NORM:g} at s={s[i + 1]:.6g}")
        X[i + 1], V[i + 1] = x, v
    return X, V


def solve_ivp(model: ConfigurationModel, x0, v0, T: float, N: int) -> Trajectory:
    """Integrate from (x0, v0) at s = -T to s = T."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if x0.size != model.n or v0.size != model.n:
        raise ValueError(f"initial data must have dimension {model.n}")
    X, V = _rk4(model, x0, v0, T, N)
    return Trajectory(T, X, V, "integrator")


def _endpoint(model, bc, v0):
    X, V = _rk4(model, bc.x_minus, v0, bc.T, bc.N)
    return X[-1], (X, V)


def shooting_jacobian(model, bc, v0, step=1e-6):
    n = model.n
    J = np.empty((n, n))
    for a in range(n):
        dv = np.zeros(n)
        dv[a] = step * max(1.0, abs(v0[a]))
        xp, _ = _endpoint(model, bc, v0 + dv)
        xm, _ = _endpoint(model, bc, v0 - dv)
        J[:, a] = (xp - xm) / (2 * dv[a])
    return J


def normalized_shooting_det(J: np.ndarray, T: float) -> float:
    """Smallest singular value of dx(T)/dv0 relative to its free-flight value 2T."""
    return float(np.linalg.svd(J, compute_uv=False)[-1] / (2.0 * T))


def solve_bvp(model: ConfigurationModel, bc: BoundaryData, v_guess=None,
              max_iter: int = 100, conjugate_tol: float = CONJUGATE_TOL) -> Trajectory:
    """Trajectory with x(-T) = x_minus and x(T) = x_plus."""
    if bc.x_minus.size != model.n:
        raise ValueError(f"boundary data must have dimension {model.n}")
    v0 = (bc.x_plus - bc.x_minus) / (2 * bc.T) if v_guess is None else np.array(v_guess, dtype=float)
    tol = 1e-10 * (1.0 + np.max(np.abs(bc.x_plus)))

    xT, (X, V) = _endpoint(model, bc, v0)
    F = xT - bc.x_plus
    for _ in range(max_iter):
        J = shooting_jacobian(model, bc, v0)
        if normalized_shooting_det(J, bc.T) < conjugate_tol:
            raise ConjugatePoint(
                f"shooting Jacobian singular on [-{bc.T}, {bc.T}]: endpoints are conjugate"
            )
        if np.max(np.abs(F)) <= tol:
            # one polishing step is cheap and takes the mismatch to roundoff
            xT_new, (X2, V2) = _endpoint(model, bc, v0 + np.linalg.solve(J, -F))
            if np.linalg.norm(xT_new - bc.x_plus) < np.linalg.norm(F):
                X, V = X2, V2
            return Trajectory(bc.T, X, V, "integrator")
        step = np.linalg.solve(J, -F)
        norm = np.linalg.norm(F)
        lam = 1.0
        for _ in range(31):
            try:
                xT_new, traj_new = _endpoint(model, bc, v0 + lam * step)
            except BlowUp:
                lam *= 0.5
                continue
            F_new = xT_new - bc.x_plus
            if np.linalg.norm(F_new) < norm:
                break
            lam *= 0.5
        else:
            raise NoConvergence("damped Newton step failed to reduce the endpoint mismatch")
        v0 = v0 + lam * step
        F, (X, V) = F_new, traj_new
    raise NoConvergence(f"shooting did not converge in {max_iter} Newton steps")

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from peierls.bracket import action
from peierls.elsolver import BoundaryData, solve_bvp
from peierls.errors import GridMismatch, MissingMetric, NotASolution
from peierls.jacobi import apply_operator, coefficients, covariant_jacobi_check
from peierls.lagrangian import Trajectory, bump, interior_max
from peierls.models import free_particle, great_circle, harmonic_oscillator, sphere


def _line(T=1.0, N=201):
    return Trajectory.from_function(T, N, lambda s: [s], lambda s: [1.0])


def _oscillation(T=1.0, N=201):
    return Trajectory.from_function(T, N, lambda s: [np.sin(s)], lambda s: [np.cos(s)])


def _equator(T=1.0, N=401):
    return Trajectory.from_function(T, N, great_circle, lambda s: [0.0, 1.0])


def test_free_coefficients():
    c = coefficients(free_particle(), _line())
    assert np.all(c.C == -1.0)
    assert np.all(c.D == 0.0)
    assert np.all(c.E == 0.0)
    assert not c.first_order


def test_harmonic_coefficients():
    c = coefficients(harmonic_oscillator(), _oscillation())
    assert np.max(np.abs(c.C + 1)) == 0.0
    assert np.max(np.abs(c.D)) == 0.0
    assert np.max(np.abs(c.E + 1)) == 0.0


def test_coefficients_symmetric_and_finite():
    c = coefficients(sphere(), _equator())
    assert np.all(np.isfinite(c.C)) and np.all(np.isfinite(c.D)) and np.all(np.isfinite(c.E))
    assert np.max(np.abs(c.C - np.swapaxes(c.C, 1, 2))) == 0.0
    assert c.traj.N == 401


def test_sphere_coefficients_match_finite_difference_partials():
    traj = _equator()
    exact = coefficients(sphere(), traj)
    fd = coefficients(sphere().with_mode("finite_difference"), traj)
    for a, b in ((exact.C, fd.C), (exact.D, fd.D), (exact.E, fd.E)):
        assert np.max(np.abs(a - b)) <= 1e-4


def test_sphere_operator_is_second_variation_of_action():
    # d^2/dlam^2 S[gamma + lam J] = integral J.L J for J vanishing at both ends
    a, b = np.array([1.1, -0.4]), np.array([1.7, 0.6])
    model = sphere()
    traj = solve_bvp(model, BoundaryData(a, b, 1.0, 801))
    s = traj.s
    J = np.stack([bump(s, -0.1, 0.7), 0.5 * bump(s, 0.2, 0.6)], axis=1)
    eps = 1e-3
    S0 = action(model, traj)
    Sp = action(model, traj.perturbed(J, eps))
    Sm = action(model, traj.perturbed(J, -eps))
    second = (Sp - 2 * S0 + Sm) / eps**2
    LJ = apply_operator(coefficients(model, traj), J)
    quad = float(np.sum(traj.weights[:, None] * J * LJ))
    assert abs(second - quad) <= 1e-4 * abs(second)


def test_free_operator_annihilates_linear_field():
    c = coefficients(free_particle(), _line())
    assert interior_max(apply_operator(c, c.traj.s)) <= 1e-10


def test_harmonic_operator_annihilates_sine():
    c = coefficients(harmonic_oscillator(), _oscillation(N=2001))
    assert interior_max(apply_operator(c, np.sin(c.traj.s))) <= 1e-3


def test_harmonic_operator_on_linear_field():
    c = coefficients(harmonic_oscillator(), _oscillation())
    out = apply_operator(c, c.traj.s)
    # second differences of s carry roundoff of order eps/h^2
    assert interior_max(out[:, 0] + c.traj.s) <= 1e-10


def test_flat_covariant_check():
    traj = _line()
    J = np.sin(3 * traj.s) + traj.s**2
    assert covariant_jacobi_check(free_particle(), traj, J) <= 1e-8


def test_sphere_normal_jacobi_field():
    traj = _equator(N=4001)
    J = np.stack([np.sin(traj.s), np.zeros(traj.N)], axis=1)
    model = sphere()
    assert covariant_jacobi_check(model, traj, J) <= 1e-3
    assert interior_max(apply_operator(coefficients(model, traj), J), 2) <= 1e-3


def test_sphere_tangent_jacobi_field():
    traj = _equator(N=4001)
    J = traj.v.copy()
    model = sphere()
    assert covariant_jacobi_check(model, traj, J) <= 1e-3
    assert interior_max(apply_operator(coefficients(model, traj), J), 2) <= 1e-3


def test_sphere_off_equator_covariant_agreement():
    a, b = np.array([1.1, -0.4]), np.array([1.7, 0.6])
    model = sphere()
    traj = solve_bvp(model, BoundaryData(a, b, 1.0, 2001))
    s = traj.s
    J = np.stack([np.cos(2 * s), s**2], axis=1)
    assert covariant_jacobi_check(model, traj, J) <= 1e-3


def test_not_a_solution():
    bent = Trajectory.from_function(1.0, 201, lambda s: [s**2])
    with pytest.raises(NotASolution):
        coefficients(free_particle(), bent)


def test_grid_mismatch():
    c = coefficients(free_particle(), _line())
    with pytest.raises(GridMismatch):
        apply_operator(c, np.zeros(101))


def test_missing_metric():
    traj = _oscillation()
    with pytest.raises(MissingMetric):
        covariant_jacobi_check(harmonic_oscillator(), traj, np.sin(traj.s))


_SPHERE_COEFFS = coefficients(sphere(), _equator(N=201))


@given(
    alpha=st.floats(-5, 5, allow_nan=False),
    beta=st.floats(-5, 5, allow_nan=False),
    seed=st.integers(0, 2**16),
)
def test_operator_is_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    u, w = rng.normal(size=(2, 201, 2))
    c = _SPHERE_COEFFS
    lhs = apply_operator(c, alpha * u + beta * w)
    rhs = alpha * apply_operator(c, u) + beta * apply_operator(c, w)
    scale = 1 + np.max(np.abs(lhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_self_adjoint_under_refinement():
    a, b = np.array([1.1, -0.4]), np.array([1.7, 0.6])
    model = sphere()
    gaps = []
    for N in (201, 401, 801):
        traj = solve_bvp(model, BoundaryData(a, b, 1.0, N))
        s = traj.s
        u = np.stack([bump(s, -0.2, 0.6), bump(s, 0.1, 0.5)], axis=1)
        w = np.stack([bump(s, 0.3, 0.5), -bump(s, -0.1, 0.7)], axis=1)
        c = coefficients(model, traj)
        wts = traj.weights[:, None]
        gap = np.sum(wts * u * apply_operator(c, w)) - np.sum(wts * apply_operator(c, u) * w)
        gaps.append(abs(gap))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-5

import numpy as np
import pytest

from peierls.elsolver import BoundaryData, normalized_shooting_det, shooting_jacobian, solve_bvp, solve_ivp
from peierls.errors import BlowUp, ConjugatePoint, SingularLvv
from peierls.lagrangian import ConfigurationModel, el_residual, interior_max
from peierls.models import free_particle, harmonic_oscillator, sphere, sphere_distance


def test_free_ivp_is_line():
    traj = solve_ivp(free_particle(), [-1.0], [1.0], 1.0, 201)
    assert np.max(np.abs(traj.x[:, 0] - traj.s)) <= 1e-12
    assert traj.velocity_source == "integrator"


def test_harmonic_ivp_matches_sine():
    traj = solve_ivp(harmonic_oscillator(), [0.0], [-1.0], np.pi, 4001)
    # x(-pi) = 0 with v = -1 gives sin(s)
    assert np.max(np.abs(traj.x[:, 0] - np.sin(traj.s))) <= 1e-8
    assert interior_max(el_residual(harmonic_oscillator(), traj)) <= 1e-5


def test_sphere_ivp_stays_on_equator():
    traj = solve_ivp(sphere(), [np.pi / 2, 0.0], [0.0, 1.0], 1.0, 401)
    assert np.max(np.abs(traj.x[:, 0] - np.pi / 2)) <= 1e-8


def test_singular_lvv():
    model = ConfigurationModel(1, lambda s, x, v: x[0] * v[0])
    with pytest.raises(SingularLvv):
        solve_ivp(model, [0.0], [1.0], 1.0, 11)


def test_blow_up():
    # L = v^2/2 + x^4/2 gives x'' = 2 x^3, which escapes in finite time
    model = ConfigurationModel(1, lambda s, x, v: 0.5 * v[0] ** 2 + 0.5 * x[0] ** 4)
    with pytest.raises(BlowUp):
        solve_ivp(model, [3.0], [10.0], 2.0, 401)


def test_free_bvp_line():
    traj = solve_bvp(free_particle(), BoundaryData([0.0], [1.0], 1.0, 201))
    assert np.max(np.abs(traj.x[:, 0] - (1 + traj.s) / 2)) <= 1e-12


def test_harmonic_bvp_conjugate():
    with pytest.raises(ConjugatePoint):
        solve_bvp(harmonic_oscillator(), BoundaryData([0.0], [0.0], np.pi, 201))


def test_sphere_bvp_great_circle():
    a, b = np.array([1.1, -0.4]), np.array([1.7, 0.6])
    model = sphere()
    traj = solve_bvp(model, BoundaryData(a, b, 1.0, 401))
    assert np.max(np.abs(traj.x[-1] - b)) <= 1e-10
    # constant speed equal to half the arc length
    speed = np.sqrt(traj.v[:, 0] ** 2 + np.sin(traj.x[:, 0]) ** 2 * traj.v[:, 1] ** 2)
    assert np.max(np.abs(speed - sphere_distance(a, b) / 2)) <= 1e-8


@pytest.mark.parametrize("model,fn,dfn", [
    (free_particle(), lambda s: 0.3 + 0.2 * s, lambda s: 0.2 + 0 * s),
    (harmonic_oscillator(), np.sin, np.cos),
])
def test_residual_order(model, fn, dfn):
    from peierls.lagrangian import Trajectory
    errs = []
    for N in (101, 201, 401):
        traj = Trajectory.from_function(1.0, N, fn, dfn)
        errs.append(interior_max(el_residual(model, traj)))
    if errs[0] < 1e-12:
        assert max(errs) < 1e-12  # exact on lines
    else:
        assert errs[0] / errs[1] >= 3.6 and errs[1] / errs[2] >= 3.6


def test_bvp_ivp_consistency():
    model = harmonic_oscillator(2, 1.0, 1.3)
    bc = BoundaryData([0.2, -0.5], [0.7, 0.1], 1.0, 201)
    traj = solve_bvp(model, bc)
    again = solve_ivp(model, traj.x[0], traj.v[0], 1.0, 201)
    assert np.max(np.abs(again.x[-1] - bc.x_plus)) <= 1e-9


def test_shooting_jacobian_is_jacobi_field():
    model = harmonic_oscillator()
    bc = BoundaryData([0.0], [0.0], 1.0, 401)
    J = shooting_jacobian(model, bc, np.array([0.0]))
    # dx(T)/dv0 = sin(2T)
    assert J[0, 0] == pytest.approx(np.sin(2.0), abs=1e-9)
    assert normalized_shooting_det(J, 1.0) == pytest.approx(np.sin(2.0) / 2, abs=1e-9)

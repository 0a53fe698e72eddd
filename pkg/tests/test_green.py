import numpy as np
import pytest
from scipy.integrate import quad

from peierls.elsolver import solve_ivp
from peierls.errors import ConjugateEndpoints, DegenerateWronskian, GridMismatch, SupportTouchesBoundary
from peierls.green import (
    JacobiBasis,
    LinearFlow,
    commutator_kernel,
    kernel_apply,
    omega_profile,
    response,
    solve_basis,
    two_form,
)
from peierls.jacobi import apply_operator, coefficients
from peierls.lagrangian import ConfigurationModel, Trajectory, bump, interior_max
from peierls.models import free_particle, great_circle, harmonic_oscillator, sphere


def _line(T=1.0, N=201):
    return Trajectory.from_function(T, N, lambda s: [s], lambda s: [1.0])


def _oscillation(T=1.0, N=201):
    return Trajectory.from_function(T, N, lambda s: [np.sin(s)], lambda s: [np.cos(s)])


def _equator(T=1.2, N=401):
    return Trajectory.from_function(T, N, great_circle, lambda s: [0.0, 1.0])


def magnetic_anisotropic(B=0.7, a=1.3, b=0.4):
    """Charged particle in a uniform field plus an anisotropic well; partials by finite differences."""

    def lagrangian(s, x, v):
        return (0.5 * (v @ v) + 0.5 * B * (x[0] * v[1] - x[1] * v[0])
                - 0.5 * (a * x[0] ** 2 + b * x[1] ** 2) - 0.1 * x[0] ** 2 * x[1] ** 2)

    return ConfigurationModel(2, lagrangian, name="magnetic")


@pytest.fixture(scope="module")
def coupled():
    model = magnetic_anisotropic()
    traj = solve_ivp(model, [0.4, -0.3], [0.2, 0.5], 1.0, 201)
    coeffs = coefficients(model, traj)
    flow = LinearFlow(coeffs)
    return model, traj, coeffs, flow, solve_basis(model, traj, coeffs, flow)


# -- two_form --------------------------------------------------------------

def test_two_form_free_unnormalized_pair():
    traj = _line()
    s = traj.s
    for i in (0, 57, 100, 200):
        assert two_form(free_particle(), traj, i, s + 1, s - 1) == pytest.approx(2.0, abs=1e-12)


def test_two_form_vanishes_on_diagonal():
    traj = _equator()
    J = np.stack([np.sin(traj.s), traj.s**2], axis=1)
    assert abs(two_form(sphere(), traj, 133, J, J)) <= 1e-15


def test_two_form_harmonic_wronskian():
    traj = _oscillation(N=2001)
    s = traj.s
    vals = [two_form(harmonic_oscillator(), traj, i, np.sin(s), np.cos(s), np.cos(s), -np.sin(s))
            for i in range(0, 2001, 250)]
    assert np.max(np.abs(np.array(vals) + 1)) <= 1e-12
    # central-difference velocities agree to O(h^2)
    assert two_form(harmonic_oscillator(), traj, 1000, np.sin(s), np.cos(s)) == pytest.approx(-1, abs=1e-6)


def test_two_form_grid_mismatch():
    with pytest.raises(GridMismatch):
        two_form(free_particle(), _line(), 0, np.zeros(101), np.zeros(101))


# -- basis -----------------------------------------------------------------

def test_free_basis():
    basis = solve_basis(free_particle(), _line())
    s = basis.s
    assert np.max(np.abs(basis.Jplus[0, :, 0] - (s + 1) / 2)) <= 1e-12
    assert np.max(np.abs(basis.Jminus[0, :, 0] - (1 - s) / 2)) <= 1e-12
    assert basis.W == pytest.approx([-0.5], abs=1e-12)
    assert basis.pairing_drift <= 1e-12


def test_harmonic_conjugate_endpoints():
    traj = Trajectory.from_function(np.pi, 401, lambda s: [np.sin(s)], lambda s: [np.cos(s)])
    with pytest.raises(ConjugateEndpoints):
        solve_basis(harmonic_oscillator(), traj)


def test_sphere_basis_invariants():
    model = sphere()
    traj = _equator()
    coeffs = coefficients(model, traj)
    basis = solve_basis(model, traj, coeffs)
    n = basis.n
    eye = np.eye(n)
    assert np.max(np.abs(basis.Jplus[:, -1, :] - eye)) <= 1e-9
    assert np.max(np.abs(basis.Jplus[:, 0, :])) <= 1e-9
    assert np.max(np.abs(basis.Jminus[:, 0, :] - eye)) <= 1e-9
    assert np.max(np.abs(basis.Jminus[:, -1, :])) <= 1e-9
    for J in basis.X:
        assert interior_max(apply_operator(coeffs, J), 2) <= 1e-4
    W = basis.W
    assert np.all(np.abs(W) > 1e-10)
    for r in range(n):
        prof = omega_profile(coeffs.grid, basis.Jplus[r], basis.dX[r], basis.Jminus[r], basis.dX[n + r])
        assert np.max(np.abs(prof - W[r])) <= 1e-6 * abs(W[r])
    # the normal direction obeys J'' + J = 0, the azimuthal one J'' = 0
    s, T = basis.s, 1.2
    assert np.max(np.abs(basis.Jplus[0, :, 0] - np.sin(s + T) / np.sin(2 * T))) <= 1e-9
    assert np.max(np.abs(basis.Jplus[1, :, 1] - (s + T) / (2 * T))) <= 1e-9


def test_degenerate_wronskian():
    X = np.zeros((2, 5, 1))
    basis = JacobiBasis(X, X, np.zeros((2, 2)), 0.0, False, np.linspace(-1, 1, 5))
    with pytest.raises(DegenerateWronskian):
        commutator_kernel(basis)


# -- kernel ----------------------------------------------------------------

def test_free_kernel():
    kernel = commutator_kernel(solve_basis(free_particle(), _line()))
    assert kernel.max_deviation(lambda s, sp: s - sp) <= 1e-8


def test_free_kernel_two_dimensions():
    traj = Trajectory.from_function(1.0, 101, lambda s: [s, -2 * s], lambda s: [1.0, -2.0])
    kernel = commutator_kernel(solve_basis(free_particle(2, 2.0), traj))
    assert kernel.max_deviation(lambda s, sp: (s - sp) / 2.0) <= 1e-8


def test_harmonic_kernel():
    kernel = commutator_kernel(solve_basis(harmonic_oscillator(), _oscillation()))
    assert kernel.max_deviation(lambda s, sp: np.sin(s - sp)) <= 1e-6


@pytest.mark.parametrize("which", ["free", "harmonic", "sphere", "coupled"])
def test_kernel_antisymmetry_and_coincidence(which, coupled):
    if which == "coupled":
        _, _, _, _, basis = coupled
    else:
        model, traj = {
            "free": (free_particle(), _line()),
            "harmonic": (harmonic_oscillator(), _oscillation()),
            "sphere": (sphere(), _equator()),
        }[which]
        basis = solve_basis(model, traj)
    G = commutator_kernel(basis).G
    assert np.max(np.abs(G + np.transpose(G, (2, 3, 0, 1)))) <= 1e-8
    diag = np.einsum("imin->imn", G)
    # Lvv is symmetric and nonsingular, so the coincident block vanishes
    assert np.max(np.abs(diag)) <= 1e-8


@pytest.mark.parametrize("which", ["harmonic", "sphere", "coupled"])
def test_kernel_annihilated_by_operator(which, coupled):
    if which == "coupled":
        _, _, coeffs, _, basis = coupled
    else:
        model, traj = {"harmonic": (harmonic_oscillator(), _oscillation()), "sphere": (sphere(), _equator())}[which]
        coeffs = coefficients(model, traj)
        basis = solve_basis(model, traj, coeffs)
    G = commutator_kernel(basis).G
    N, n = G.shape[:2]
    worst = 0.0
    for j in range(0, N, 20):
        for nu in range(n):
            worst = max(worst, interior_max(apply_operator(coeffs, G[:, :, j, nu]), 2))
    assert worst <= 1e-3


# -- responses -------------------------------------------------------------

def test_zero_source_zero_response():
    traj = _oscillation()
    out = response(harmonic_oscillator(), traj, None, np.zeros((201, 1)), "retarded")
    assert np.all(out == 0)


def test_free_bump_response():
    traj = _line()
    s = traj.s
    c, h = -0.2, 0.3
    src = bump(s, c, h)[:, None]
    ret = response(free_particle(), traj, None, src, "retarded")[:, 0]
    adv = response(free_particle(), traj, None, src, "advanced")[:, 0]
    mass, _ = quad(lambda t: bump(t, c, h), c - h, c + h, epsabs=1e-14)
    moment, _ = quad(lambda t: t * bump(t, c, h), c - h, c + h, epsabs=1e-14)
    before, after = s <= c - h, s >= c + h
    assert np.max(np.abs(ret[before])) <= 1e-9
    assert np.max(np.abs(adv[after])) <= 1e-9
    # L d = -src with L = -d^2 means d'' = src: slope jumps by the source mass
    # continuum oracle, limited by trapezoid quadrature of the bump
    assert np.max(np.abs(ret[after] - (mass * s[after] - moment))) <= 1e-6
    assert np.max(np.abs(adv[before] + (mass * s[before] - moment))) <= 1e-6
    # impulse oracle: sum over nodes s_j <= s_i of w_j (s_i - s_j) src_j, exact for a free particle
    w = traj.weights
    ramp = np.maximum(s[:, None] - s[None, :], 0.0)
    assert np.max(np.abs(ret - ramp @ (w * src[:, 0]))) <= 1e-12
    slope = np.diff(ret[after]) / traj.ds
    assert np.max(np.abs(slope - np.sum(w * src[:, 0]))) <= 1e-10


def test_support_touches_boundary():
    src = np.zeros((201, 1))
    src[0] = 1.0
    with pytest.raises(SupportTouchesBoundary):
        response(free_particle(), _line(), None, src, "retarded")


def _random_source(rng, s, n):
    out = np.zeros((s.size, n))
    for _ in range(3):
        h = rng.uniform(0.1, 0.3)
        c = rng.uniform(-1 + 1.1 * h, 1 - 1.1 * h)
        out += bump(s, c, h)[:, None] * rng.normal(size=n)
    return out


@pytest.mark.parametrize("which", ["free", "harmonic", "sphere", "coupled"])
def test_retarded_minus_advanced_matches_kernel(which, coupled, rng):
    if which == "coupled":
        model, traj, coeffs, flow, basis = coupled
    else:
        model, traj = {
            "free": (free_particle(), _line()),
            "harmonic": (harmonic_oscillator(), _oscillation()),
            "sphere": (sphere(), Trajectory.from_function(1.0, 201, great_circle, lambda s: [0.0, 1.0])),
        }[which]
        coeffs = coefficients(model, traj)
        flow = LinearFlow(coeffs)
        basis = solve_basis(model, traj, coeffs, flow)
    worst = 0.0
    for _ in range(50):
        src = _random_source(rng, traj.s, traj.n)
        diff = (response(model, traj, coeffs, src, "retarded", flow)
                - response(model, traj, coeffs, src, "advanced", flow))
        field, _ = kernel_apply(basis, src, traj.weights)
        worst = max(worst, np.max(np.abs(diff - field)) / np.max(np.abs(field)))
    assert worst <= 1e-7


def test_coupled_basis_is_not_pairing_diagonal(coupled):
    *_, basis = coupled
    n = basis.n
    off = basis.pairing[:n, n:] - np.diag(np.diag(basis.pairing[:n, n:]))
    assert np.max(np.abs(off)) > 1e-3
    assert basis.pairing_drift <= 1e-8

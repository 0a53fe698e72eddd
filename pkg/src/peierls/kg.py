"""Klein-Gordon field on a periodic spatial lattice.

Space is a box of edge L with M sites per dimension (spacing a = L/M) and
the spatial operator is spectral: each Fourier mode k = 2 pi n / L with
n in (-M/2, M/2] oscillates at omega_k = sqrt(k.k + m^2).  Sums over
sites carry the cell volume a^d.

The commutator function is

    G(dx, dt) = L^{-d} sum_k cos(k.dx) sin(omega_k dt) / omega_k,

odd in dt, zero at equal times, with d/dt G(dx, 0) the lattice delta
delta_{dx,0} / a^d.  Brackets follow {phi(x1), phi(x2)} = G(x1 - x2).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MasslessZeroMode, NotASolution, ResonantInterval

RESONANCE_TOL = 1e-8
STENCIL_TOL = 1e-2


@dataclass(frozen=True)
class LatticeSpec:
    d: int = 1
    L: float = 2 * np.pi
    M: int = 64
    m: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.d}")
        if self.M < 2 or self.M % 2:
            raise ValueError(f"sites per dimension must be even and >= 2, got {self.M}")
        if not self.L > 0:
            raise ValueError("box length must be positive")
        if self.m < 0:
            raise ValueError("mass must be non-negative")

    @property
    def a(self) -> float:
        return self.L / self.M

    @property
    def cell_volume(self) -> float:
        return self.a**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.d

    @property
    def sites(self) -> int:
        return self.M**self.d

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Integer mode vectors in FFT order, shape (M,)*d + (d,), Nyquist mapped to +M/2."""
        n1 = np.fft.fftfreq(self.M, d=1.0 / self.M).round().astype(int)
        n1[n1 == -self.M // 2] = self.M // 2
        grids = np.meshgrid(*([n1] * self.d), indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def k(self) -> np.ndarray:
        return 2 * np.pi * self.mode_numbers / self.L

    @cached_property
    def omega(self) -> np.ndarray:
        return np.sqrt(np.sum(self.k**2, axis=-1) + self.m**2)

    @cached_property
    def positions(self) -> np.ndarray:
        """Site coordinates, shape (M,)*d + (d,)."""
        x1 = self.a * np.arange(self.M)
        return np.stack(np.meshgrid(*([x1] * self.d), indexing="ij"), axis=-1)

    def site_position(self, site) -> np.ndarray:
        return self.a * np.atleast_1d(np.asarray(site, dtype=float)).reshape(self.d)


@dataclass(frozen=True)
class FieldConfiguration:
    tau: np.ndarray
    values: np.ndarray      # (Nt,) + spec.shape
    velocities: np.ndarray  # analytic d/dtau of values
    spec: LatticeSpec


def _as_field(spec: LatticeSpec, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.size != spec.sites:
        raise ValueError(f"field has {phi.size} entries, lattice has {spec.sites} sites")
    return phi.reshape(spec.shape)


def _axes(spec):
    return tuple(range(1, spec.d + 1))


def kg_boundary_solution(spec: LatticeSpec, phi1, phi2, tau) -> FieldConfiguration:
    """Solution with phi(tau[0]) = phi1 and phi(tau[-1]) = phi2, mode by mode.

    phi_k(t) = [phi2_k sin w(t - t1) - phi1_k sin w(t - t2)] / sin w(t2 - t1).
    """
    tau = np.asarray(tau, dtype=float)
    t1, t2 = tau[0], tau[-1]
    if not t2 > t1:
        raise ValueError("time grid must be increasing")
    f1 = np.fft.fftn(_as_field(spec, phi1))
    f2 = np.fft.fftn(_as_field(spec, phi2))
    w = spec.omega
    span = t2 - t1
    den = np.sin(w * span)
    bad = np.abs(den) < RESONANCE_TOL
    zero = w == 0.0
    if np.any(bad & ~zero):
        modes = [tuple(int(c) for c in n) for n in spec.mode_numbers[bad & ~zero]]
        raise ResonantInterval(f"interval {span:g} is resonant for modes {modes}", modes=modes)
    safe_w = np.where(zero, 1.0, w)
    safe_den = np.where(zero, 1.0, den)

    t = tau.reshape((-1,) + (1,) * spec.d)
    sa, sb = np.sin(safe_w * (t - t1)), np.sin(safe_w * (t - t2))
    ca, cb = np.cos(safe_w * (t - t1)), np.cos(safe_w * (t - t2))
    amp = (f2 * sa - f1 * sb) / safe_den
    vel = safe_w * (f2 * ca - f1 * cb) / safe_den
    # zero-frequency mode (m = 0, k = 0) interpolates linearly
    lin = (f1 * (t2 - t) + f2 * (t - t1)) / span
    amp = np.where(zero, lin, amp)
    vel = np.where(zero, (f2 - f1) / span, vel)
    ax = _axes(spec)
    values = np.fft.ifftn(amp, axes=ax).real
    velocities = np.fft.ifftn(vel, axes=ax).real
    return FieldConfiguration(tau, values, velocities, spec)


def mode_solution(spec: LatticeSpec, n, tau, spatial: str = "cos", temporal: str = "cos") -> FieldConfiguration:
    """Real single-mode solution trig(k.x) * trig(omega t) with velocities."""
    n = np.atleast_1d(np.asarray(n, dtype=float)).reshape(spec.d)
    k = 2 * np.pi * n / spec.L
    w = float(np.sqrt(k @ k + spec.m**2))
    tau = np.asarray(tau, dtype=float)
    kx = spec.positions @ k
    space = np.cos(kx) if spatial == "cos" else np.sin(kx)
    if temporal == "cos":
        time, dtime = np.cos(w * tau), -w * np.sin(w * tau)
    else:
        time, dtime = np.sin(w * tau), w * np.cos(w * tau)
    shape = (-1,) + (1,) * spec.d
    return FieldConfiguration(tau, time.reshape(shape) * space, dtime.reshape(shape) * space, spec)


def kg_residual(config: FieldConfiguration) -> np.ndarray:
    """Leapfrog-in-time residual with the spectral spatial operator, interior slices."""
    spec = config.spec
    tau = config.tau
    if tau.size < 3:
        raise NotASolution("at least three time slices are needed for the stencil")
    dt = tau[1] - tau[0]
    phi = config.values
    ax = _axes(spec)
    kin = np.fft.ifftn(spec.omega**2 * np.fft.fftn(phi, axes=ax), axes=ax).real
    return (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / dt**2 + kin[1:-1]


def _check_solution(config: FieldConfiguration, tol: float):
    spec = config.spec
    ax = _axes(spec)
    kin = np.fft.ifftn(spec.omega**2 * np.fft.fftn(config.values, axes=ax), axes=ax).real
    scale = np.max(np.abs(kin))
    res = np.max(np.abs(kg_residual(config)))
    if res > tol * max(scale, 1e-300):
        raise NotASolution(f"field violates the Klein-Gordon stencil (residual {res:.3e}, scale {scale:.3e})")


def flux_profile(J1: FieldConfiguration, J2: FieldConfiguration, tol: float = STENCIL_TOL) -> np.ndarray:
    """sum over sites of (J2 dJ1/dt - J1 dJ2/dt) * cell volume at every slice."""
    if J1.spec != J2.spec or J1.values.shape != J2.values.shape or not np.array_equal(J1.tau, J2.tau):
        raise ValueError("configurations live on different grids")
    _check_solution(J1, tol)
    _check_solution(J2, tol)
    ax = _axes(J1.spec)
    dens = J2.values * J1.velocities - J1.values * J2.velocities
    return np.sum(dens, axis=ax) * J1.spec.cell_volume


def symplectic_current_flux(spec: LatticeSpec, J1: FieldConfiguration, J2: FieldConfiguration,
                            tau_index: int, tol: float = STENCIL_TOL) -> float:
    if J1.spec != spec or J2.spec != spec:
        raise ValueError("configurations do not belong to this lattice")
    return float(flux_profile(J1, J2, tol)[tau_index])


def _require_massive(spec: LatticeSpec):
    if spec.m == 0:
        raise MasslessZeroMode("the k = 0 mode has omega = 0; the commutator mode sum is singular")


def commutator_function(spec: LatticeSpec, dx, dt) -> float:
    """G(dx, dt) for a physical displacement dx (length d) and time difference dt."""
    _require_massive(spec)
    dx = np.atleast_1d(np.asarray(dx, dtype=float)).reshape(spec.d)
    k = spec.k.reshape(-1, spec.d)
    w = spec.omega.ravel()
    return float(np.sum(np.cos(k @ dx) * np.sin(w * dt) / w) / spec.L**spec.d)


def commutator_time_derivative(spec: LatticeSpec, dx, dt) -> float:
    _require_massive(spec)
    dx = np.atleast_1d(np.asarray(dx, dtype=float)).reshape(spec.d)
    k = spec.k.reshape(-1, spec.d)
    w = spec.omega.ravel()
    return float(np.sum(np.cos(k @ dx) * np.cos(w * dt)) / spec.L**spec.d)


def kg_commutator(spec: LatticeSpec, x, y) -> float:
    """G(x - y) for spacetime points given as (time, site index)."""
    (tx, sx), (ty, sy) = x, y
    return commutator_function(spec, spec.site_position(sx) - spec.site_position(sy), tx - ty)


def lattice_delta(spec: LatticeSpec, site) -> float:
    """delta_{site,0} / a^d for an integer site offset (periodic)."""
    off = np.atleast_1d(np.asarray(site)).reshape(spec.d) % spec.M
    return 1.0 / spec.cell_volume if not np.any(off) else 0.0


@dataclass(frozen=True)
class SpacetimeDensity:
    """A linear functional sum_p weight_p * phi(time_p, site_p)."""

    times: np.ndarray
    sites: np.ndarray   # (P, d) integer site indices
    weights: np.ndarray
    label: str = "A"

    @classmethod
    def point(cls, spec: LatticeSpec, time: float, site, label: str = "phi") -> "SpacetimeDensity":
        s = np.atleast_1d(np.asarray(site, dtype=int)).reshape(1, spec.d)
        return cls(np.array([float(time)]), s, np.array([1.0]), label)

    @classmethod
    def from_grid(cls, spec: LatticeSpec, tau, values, label: str = "A") -> "SpacetimeDensity":
        """Density sampled on (tau x sites), with trapezoid-in-time and cell-volume weights."""
        tau = np.asarray(tau, dtype=float)
        values = np.asarray(values, dtype=float).reshape((tau.size,) + spec.shape)
        wt = np.full(tau.size, tau[1] - tau[0]) if tau.size > 1 else np.ones(1)
        if tau.size > 1:
            wt[0] = wt[-1] = 0.5 * (tau[1] - tau[0])
        idx = np.nonzero(values)
        times = tau[idx[0]]
        sites = np.stack(idx[1:], axis=-1)
        weights = values[idx] * wt[idx[0]] * spec.cell_volume
        return cls(times, sites, weights, label)


def _mode_sums(spec: LatticeSpec, dens: SpacetimeDensity):
    k = spec.k.reshape(-1, spec.d)
    w = spec.omega.ravel()
    x = dens.sites * spec.a
    phase = np.exp(-1j * (x @ k.T))                         # (P, K)
    wt = np.outer(dens.times, w)                            # (P, K)
    S = np.sum(dens.weights[:, None] * phase * np.sin(wt), axis=0)
    C = np.sum(dens.weights[:, None] * phase * np.cos(wt), axis=0)
    return S, C, w


def kg_peierls_bracket(spec: LatticeSpec, A: SpacetimeDensity, B: SpacetimeDensity) -> float:
    """sum_{p,q} a_p b_q G(x_p - x_q), factorized over modes."""
    _require_massive(spec)
    Sa, Ca, w = _mode_sums(spec, A)
    Sb, Cb, _ = _mode_sums(spec, B)
    val = np.sum((np.conj(Sa) * Cb - np.conj(Ca) * Sb).real / w)
    return float(val / spec.L**spec.d)


def commutator_table(spec: LatticeSpec, site_offsets, dts) -> list[tuple[float, float, float]]:
    """(dx, dt, G) rows over a grid of displacements along the first axis."""
    rows = []
    for off in site_offsets:
        dx = np.zeros(spec.d)
        dx[0] = off * spec.a
        for dt in dts:
            rows.append((float(dx[0]), float(dt), commutator_function(spec, dx, dt)))
    return rows

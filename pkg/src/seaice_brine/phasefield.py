"""One-dimensional phase-field solver for (phi, theta, rho).

Temperatures are absolute (Kelvin). The grid is cell centered with
homogeneous Neumann (zero-flux) boundaries imposed through mirrored ghost
cells. Time stepping is explicit Euler on the conserved variables

    phi,    u = theta - b(theta) W1(phi),    M = w(phi) rho,

with ``w(phi) = phi exp(-W1(phi))`` floored at ``params.mobility_floor``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DomainError,
    ModelParams,
    front_profile,
    latent_b,
    latent_B,
    salt_weight,
    v1_dphi,
    w0,
    w0_prime,
    w1,
)

THETA_BRACKET = (150.0, 400.0)
THETA_NEWTON_MAX_ITER = 50


class IntegrationError(RuntimeError):
    """Non-finite state or failed inversion; ``cell`` is the offending index."""

    def __init__(self, message: str, cell: int | None = None):
        super().__init__(message if cell is None else f"{message} (cell {cell})")
        self.cell = cell


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    domain_length: float

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError("Grid1D needs at least 8 cells")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")

    @property
    def dx(self) -> float:
        return self.domain_length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class Field1D:
    """Snapshot of the 1-D fields; theta in Kelvin, rho the relative salt density."""

    grid: Grid1D
    phi: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        n = self.grid.n_cells
        for name in ("phi", "theta", "rho"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.theta <= 0):
            raise DomainError("theta must be positive (Kelvin)")
        if np.any(self.rho < 0):
            raise DomainError("rho must be nonnegative")


@dataclass(frozen=True)
class Diagnostics1D:
    total_internal_energy: float
    total_salt: float
    total_entropy: float
    entropy_production_rate: float

    def to_dict(self) -> dict:
        return {
            "total_internal_energy": self.total_internal_energy,
            "total_salt": self.total_salt,
            "total_entropy": self.total_entropy,
            "entropy_production_rate": self.entropy_production_rate,
        }


# --- discrete operators --------------------------------------------------------

def _laplacian(f: np.ndarray, dx: float) -> np.ndarray:
    g = np.concatenate(([f[0]], f, [f[-1]]))
    return (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dx**2


def _weight(phi, params: ModelParams):
    return np.maximum(salt_weight(phi), params.mobility_floor)


def _face_mobility(w: np.ndarray) -> np.ndarray:
    # min keeps the effective rho diffusivity (mobility / cell weight) <= sigma_N,
    # so the explicit step stays stable across the ice side of the front
    return np.minimum(w[:-1], w[1:])


def _salt_flux(phi, rho, dx, params: ModelParams) -> np.ndarray:
    """Interior face fluxes ``sigma_N m (rho_x + delta_g rho)``; boundary fluxes are zero."""
    m = _face_mobility(_weight(phi, params))
    rho_f = 0.5 * (rho[:-1] + rho[1:])
    return params.sigma_N * m * ((rho[1:] - rho[:-1]) / dx + params.delta_g * rho_f)


def _divergence(flux: np.ndarray, dx: float) -> np.ndarray:
    f = np.concatenate(([0.0], flux, [0.0]))
    return (f[1:] - f[:-1]) / dx


def _check_finite(*arrays):
    for arr in arrays:
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise IntegrationError("non-finite value in phase-field state", int(bad[0]))


def rhs(state: Field1D, params: ModelParams):
    """Semi-discrete time derivatives of ``(phi, u, M)``.

    Returns
    -------
    dphi_dt, du_dt, dM_dt : ndarray
        ``phi_xx / H - H W0'(phi) - dV1/dphi``, ``sigma_theta theta_xx`` and the
        conservative salt divergence.
    """
    _check_finite(state.phi, state.theta, state.rho)
    dx = state.grid.dx
    phi, theta, rho = state.phi, state.theta, state.rho
    H = params.H
    dphi = _laplacian(phi, dx) / H - H * w0_prime(phi) - v1_dphi(phi, theta, rho, params)
    du = params.sigma_theta * _laplacian(theta, dx)
    dM = _divergence(_salt_flux(phi, rho, dx, params), dx)
    _check_finite(dphi, du, dM)
    return dphi, du, dM


def stable_dt(grid: Grid1D, params: ModelParams) -> float:
    """Largest step allowed by the explicit stability bound."""
    dx2 = grid.dx**2
    return params.cfl * min(params.H * dx2, dx2 / params.sigma_theta, dx2 / params.sigma_N,
                            1.0 / (36.0 * params.H))


def internal_energy(phi, theta, params: ModelParams):
    return theta - latent_b(theta, params) * w1(phi)


def theta_from_energy(u, phi, params: ModelParams, theta_guess=None) -> np.ndarray:
    """Invert ``u = theta - b(theta) W1(phi)`` pointwise.

    Newton from ``theta_guess`` with a bisection fallback on [150, 400] K for
    cells that leave the bracket or fail to converge.
    """
    u = np.asarray(u, dtype=float)
    a = w1(np.asarray(phi, dtype=float))
    beta, ts = params.beta, params.theta_star
    lo, hi = THETA_BRACKET

    def f(th):
        return th - 0.5 * beta * (th**2 - ts**2) * a - u

    th = np.array(u if theta_guess is None else theta_guess, dtype=float, copy=True)
    th = np.clip(th, lo, hi)
    tol = params.newton_tol * max(1.0, float(np.max(np.abs(u))))
    done = False
    for _ in range(THETA_NEWTON_MAX_ITER):
        res = f(th)
        if np.max(np.abs(res)) < tol:
            done = True
            break
        th = th - res / (1.0 - beta * th * a)
        if np.any((th < lo) | (th > hi) | ~np.isfinite(th)):
            break
    if done:
        return th - f(th) / (1.0 - beta * th * a)  # one polishing step, quadratic convergence
    # bisection on cells that did not settle; f is increasing where W1 <= 0
    bad = ~(np.isfinite(th) & (th >= lo) & (th <= hi) & (np.abs(f(np.clip(th, lo, hi))) < tol))
    th = np.clip(np.where(np.isfinite(th), th, lo), lo, hi)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        a_b, u_b = a[idx], u[idx]
        g = lambda t: t - 0.5 * beta * (t**2 - ts**2) * a_b - u_b  # noqa: E731
        left, right = np.full(idx.size, lo), np.full(idx.size, hi)
        gl, gr = g(left), g(right)
        if np.any(gl * gr > 0):
            cell = int(idx[np.flatnonzero(gl * gr > 0)[0]])
            raise IntegrationError("temperature inversion left the [150, 400] K bracket", cell)
        for _ in range(200):
            mid = 0.5 * (left + right)
            gm = g(mid)
            go_left = gm * gl > 0
            left = np.where(go_left, mid, left)
            gl = np.where(go_left, gm, gl)
            right = np.where(go_left, right, mid)
            if np.max(right - left) < 1e-13 * hi:
                break
        th[idx] = 0.5 * (left + right)
    res = np.abs(f(th))
    if np.max(res) > max(tol, 1e-9):
        raise IntegrationError("temperature inversion did not converge", int(np.argmax(res)))
    return th


def step(state: Field1D, dt: float, params: ModelParams) -> Field1D:
    """One explicit Euler step; raises if ``dt`` exceeds the stability bound."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    limit = stable_dt(state.grid, params)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the stability bound {limit:g}")
    dphi, du, dM = rhs(state, params)
    phi_new = state.phi + dt * dphi
    u_new = internal_energy(state.phi, state.theta, params) + dt * du
    M_new = _weight(state.phi, params) * state.rho + dt * dM
    theta_new = theta_from_energy(u_new, phi_new, params, theta_guess=state.theta)
    rho_new = M_new / _weight(phi_new, params)
    _check_finite(phi_new, theta_new, rho_new)
    neg = np.flatnonzero(rho_new < 0)
    if neg.size:
        if np.min(rho_new) < -1e-12 * max(1.0, float(np.max(rho_new))):
            raise IntegrationError("negative salt density", int(neg[0]))
        rho_new = np.where(rho_new < 0, 0.0, rho_new)  # round-off only
    return Field1D(state.grid, phi_new, theta_new, rho_new, state.time + dt)


# --- diagnostics -----------------------------------------------------------------

def _entropy_density(state: Field1D, params: ModelParams) -> np.ndarray:
    phi, theta, rho = state.phi, state.theta, state.rho
    a = w1(phi)
    N = _weight(phi, params) * rho
    # N (1 - ln(N/phi)) written through rho: ln(N/phi) = ln(rho) - W1 where phi > floor
    pos = rho > 0
    logrho = np.log(np.where(pos, rho, 1.0))
    salt = np.where(pos, N * (1.0 - logrho + a), 0.0)
    xi = N + params.beta * (theta - params.theta_star)
    return (np.log(theta) + salt - params.delta_g * N * state.grid.x
            - params.H * w0(phi) - a * xi)


def total_entropy(state: Field1D, params: ModelParams) -> float:
    dx = state.grid.dx
    grad = np.diff(state.phi) / dx
    return float(dx * np.sum(_entropy_density(state, params))
                 - dx * np.sum(grad**2) / (2.0 * params.H))


def diagnostics(state: Field1D, params: ModelParams) -> Diagnostics1D:
    """Conserved totals, discrete entropy and its production rate."""
    dx = state.grid.dx
    phi, theta, rho = state.phi, state.theta, state.rho
    E = float(dx * np.sum(internal_energy(phi, theta, params)))
    N_T = float(dx * np.sum(_weight(phi, params) * rho))
    S = total_entropy(state, params)
    dphi, _, _ = rhs(state, params)
    # thermal part: sigma_theta theta^2 |grad(1/theta)|^2 on faces
    inv = 1.0 / theta
    th_f2 = theta[:-1] * theta[1:]
    p_theta = params.sigma_theta * th_f2 * (np.diff(inv) / dx) ** 2
    # salt part: face flux times the jump of the salt chemical potential
    # (ln rho + delta_g x); falls back to flux^2 / rho_f next to empty cells
    m = _face_mobility(_weight(phi, params))
    rho_f = 0.5 * (rho[:-1] + rho[1:])
    g = np.diff(rho) / dx + params.delta_g * rho_f
    both = (rho[:-1] > 0) & (rho[1:] > 0)
    dmu = np.diff(np.log(np.where(rho > 0, rho, 1.0))) / dx + params.delta_g
    p_exact = g * dmu
    p_fall = np.where(rho_f > 0, g**2 / np.where(rho_f > 0, rho_f, 1.0), 0.0)
    p_salt = params.sigma_N * m * np.where(both, p_exact, p_fall)
    P = float(dx * (np.sum(dphi**2) + np.sum(p_theta) + np.sum(p_salt)))
    return Diagnostics1D(E, N_T, S, P)


# --- drivers ---------------------------------------------------------------------

@dataclass
class Trajectory1D:
    frames: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    steps: int = 0


def simulate(state: Field1D, dt: float, n_steps: int, params: ModelParams,
             save_every_steps: int = 0, callback=None) -> Trajectory1D:
    """Run ``n_steps`` explicit steps, saving a frame every ``save_every_steps``.

    The initial and final states are always saved. ``callback(state)`` is called
    after each step if given.
    """
    traj = Trajectory1D()

    def save(s):
        traj.frames.append(s)
        traj.diagnostics.append(diagnostics(s, params))

    save(state)
    for k in range(1, n_steps + 1):
        state = step(state, dt, params)
        if callback is not None:
            callback(state)
        if save_every_steps and k % save_every_steps == 0 and k != n_steps:
            save(state)
    save(state)
    traj.steps = n_steps
    return traj


def front_position(state: Field1D) -> float:
    """Location of the single ``phi = 1/2`` crossing (linear interpolation)."""
    d = state.phi - 0.5
    cross = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)
    exact = np.flatnonzero(d == 0)
    if cross.size + exact.size == 0:
        raise ValueError("no phi = 1/2 crossing")
    if cross.size + exact.size > 1:
        raise ValueError("multiple phi = 1/2 crossings")
    x = state.grid.x
    if exact.size:
        return float(x[exact[0]])
    i = cross[0]
    t = d[i] / (d[i] - d[i + 1])
    return float(x[i] + t * (x[i + 1] - x[i]))


def measure_front_velocity(trajectory) -> float:
    """Least-squares slope of the ``phi = 1/2`` crossing against time."""
    frames = trajectory.frames if hasattr(trajectory, "frames") else list(trajectory)
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    t = np.array([f.time for f in frames])
    z = np.array([front_position(f) for f in frames])
    return float(np.polyfit(t, z, 1)[0])


def front_state(grid: Grid1D, x_front: float, theta: float, rho_liquid: float,
                params: ModelParams) -> Field1D:
    """Liquid on the left of ``x_front``, ice on the right, uniform theta and rho.

    ``rho`` is set to ``rho_liquid`` everywhere, so the ice holds essentially
    no salt (``N = w(phi) rho`` vanishes with phi).
    """
    x = grid.x
    phi = front_profile(params.H * (x - x_front))
    return Field1D(grid, phi, np.full_like(x, theta), np.full_like(x, rho_liquid), 0.0)


def sharp_interface_speed(theta: float, N: float, params: ModelParams) -> float:
    """Speed at which the liquid invades the ice, ``(B(theta) + N) / H``.

    Uses ``int Phi'^2 = 1``.
    """
    return (latent_B(theta, params) + N) / params.H

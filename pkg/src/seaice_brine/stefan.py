"""Quasi-steady axisymmetric Stefan reduction.

Lengths are in millimetres (one scaled length unit), temperatures in degrees
Celsius with the pure-water freezing point at 0, salt in percent weight and
time in slow units ``tau = t / H``.

A closed inclusion is represented by its generating curve ``(r(s), x3(s))``
sampled at cell centres ``s_i = (i + 1/2)/n`` of ``[0, 1]``. ``s = 0`` is the
bottom pole and ``s = 1`` the top pole. Ghost nodes beyond either pole carry
the symmetry conditions: ``r`` is odd and ``x3`` is even about each pole.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .model import ModelParams


class GeometryError(ValueError):
    """Degenerate or invalid interface geometry."""


class NewtonDivergence(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class Topology(str, enum.Enum):
    CLOSED = "closed_inclusion"
    OPEN = "open_pore"


@dataclass(frozen=True)
class InterfaceCurve:
    r: np.ndarray
    x3: np.ndarray
    topology: Topology = Topology.CLOSED

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        x3 = np.asarray(self.x3, dtype=float)
        if r.shape != x3.shape or r.ndim != 1:
            raise GeometryError("r and x3 must be 1-D arrays of equal length")
        if r.size < 16:
            raise GeometryError(f"need at least 16 nodes, got {r.size}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(x3))):
            raise GeometryError("non-finite curve coordinates")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "x3", x3)

    @property
    def n(self) -> int:
        return self.r.size

    @property
    def s_nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n


@dataclass(frozen=True)
class ThermalProfile:
    """Linear quasi-steady temperature ``Theta0 = a0 + b0 * x3``.

    ``a0`` in degC, ``b0`` in degC per mm. Sea ice that is colder toward the
    surface (``+x3``) has ``b0 < 0``; 14 degC/m is ``b0 = -0.014``.
    """

    a0: float
    b0: float = 0.0

    def __call__(self, x3):
        return self.a0 + self.b0 * x3


@dataclass(frozen=True)
class BrineState:
    curve: InterfaceCurve
    total_salt: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.total_salt > 0:
            raise ValueError("total_salt must be positive for a liquid inclusion")


@dataclass(frozen=True)
class PinchEvent:
    tau: float
    s_location: float
    x3_location: float
    r_min: float

    def to_dict(self) -> dict:
        return {"type": "pinch", "tau": self.tau, "s": self.s_location, "x3": self.x3_location}


# --- construction -------------------------------------------------------------

def sphere_curve(radius: float, n: int, center: float = 0.0) -> InterfaceCurve:
    s = (np.arange(n) + 0.5) / n
    return InterfaceCurve(radius * np.sin(np.pi * s), center - radius * np.cos(np.pi * s))


def cylinder_curve(radius: float, length: float, n: int) -> InterfaceCurve:
    """Open straight pore ``r = radius``, ``x3 = s * length``."""
    s = (np.arange(n) + 0.5) / n
    return InterfaceCurve(np.full(n, float(radius)), s * length, Topology.OPEN)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def capsule_curve(length: float, radius: float, n: int, blend_nodes: float = 3.0,
                  center: float = 0.0) -> InterfaceCurve:
    """Cylinder of ``length`` capped by hemispheres of ``radius``.

    The generating-curve curvature jumps from ``1/radius`` to 0 at the two
    joins; it is blended with a C2 smoothstep over ``blend_nodes`` node
    spacings, and the turning is renormalised so that the curve still closes
    on the axis. Nodes are equally spaced in arc length.
    """
    if length < 0 or radius <= 0:
        raise GeometryError("capsule needs length >= 0 and radius > 0")
    total = np.pi * radius + length
    m = 40 * n + 1
    ell = np.linspace(0.0, total, m)
    quarter = 0.5 * np.pi * radius
    width = blend_nodes * total / n
    # curvature: 1/radius on [0, quarter] and [total-quarter, total], else 0
    k_lo = 1.0 - _smoothstep((ell - quarter + 0.5 * width) / width)
    k_hi = _smoothstep((ell - (total - quarter) + 0.5 * width) / width)
    k = (k_lo + k_hi) / radius
    psi = np.concatenate([[0.0], np.cumsum(0.5 * (k[1:] + k[:-1]) * np.diff(ell))])
    psi *= np.pi / psi[-1]
    dr = np.cos(psi)
    dx = np.sin(psi)
    r = np.concatenate([[0.0], np.cumsum(0.5 * (dr[1:] + dr[:-1]) * np.diff(ell))])
    x = np.concatenate([[0.0], np.cumsum(0.5 * (dx[1:] + dx[:-1]) * np.diff(ell))])
    nodes = (np.arange(n) + 0.5) / n * total
    rn = np.interp(nodes, ell, r)
    xn = np.interp(nodes, ell, x)
    xn = xn - 0.5 * x[-1] + center
    return InterfaceCurve(rn, xn)


# --- discrete differential geometry ----------------------------------------------

def _extend(curve: InterfaceCurve):
    """Arrays with one ghost node at each end."""
    r, x = curve.r, curve.x3
    if curve.topology is Topology.CLOSED:
        re = np.concatenate([[-r[0]], r, [-r[-1]]])
        xe = np.concatenate([[x[0]], x, [x[-1]]])
    else:
        # open pore: zero-slope (mirror) conditions at both ends
        re = np.concatenate([[r[0]], r, [r[-1]]])
        xe = np.concatenate([[2 * x[0] - x[1]], x, [2 * x[-1] - x[-2]]])
    return re, xe


def _derivatives(curve: InterfaceCurve):
    h = 1.0 / curve.n
    re, xe = _extend(curve)
    rp = (re[2:] - re[:-2]) / (2 * h)
    xp = (xe[2:] - xe[:-2]) / (2 * h)
    rpp = (re[2:] - 2 * re[1:-1] + re[:-2]) / h**2
    xpp = (xe[2:] - 2 * xe[1:-1] + xe[:-2]) / h**2
    return rp, xp, rpp, xpp


def curvature(curve: InterfaceCurve) -> np.ndarray:
    """Curvature ``kappa0`` per node (``-1/R`` on a sphere, ``-1/(2 r)`` on a cylinder).

    ``kappa0 = -[x'^3 + r'^2 x' - r r'' x' + r r' x''] / (2 r (x'^2 + r'^2)^{3/2})``
    with centred differences in ``s``. Nodes sit half a cell from the poles, so
    the removable ``1/r`` singularity is never evaluated at ``r = 0``; the odd
    ghost extension of ``r`` supplies the pole limit.
    """
    rp, xp, rpp, xpp = _derivatives(curve)
    q = xp**2 + rp**2
    if np.any(q < 1e-14):
        raise GeometryError("degenerate tangent")
    r = curve.r
    if np.any(r <= 0):
        raise GeometryError("non-positive radius")
    num = xp**3 + rp**2 * xp - r * rpp * xp + r * rp * xpp
    return -num / (2 * r * q**1.5)


def _trapezoid_weights(n: int, topology: Topology) -> np.ndarray:
    """Trapezoid weights on nodes for a closed curve whose integrand vanishes at the poles."""
    h = 1.0 / n
    w = np.full(n, h)
    if topology is Topology.CLOSED:
        w[0] = w[-1] = 0.75 * h
    else:
        w[0] = w[-1] = 0.5 * h
    return w


def volume_integral(curve: InterfaceCurve, delta_g: float = 0.0) -> float:
    """``int pi r^2 exp(-delta_g x3) x3' ds`` by the trapezoid rule."""
    _, xp, _, _ = _derivatives(curve)
    f = np.pi * curve.r**2 * np.exp(-delta_g * curve.x3) * xp
    return float(np.dot(_trapezoid_weights(curve.n, curve.topology), f))


def volume(curve: InterfaceCurve) -> float:
    return volume_integral(curve, 0.0)


def centroid_height(curve: InterfaceCurve) -> float:
    _, xp, _, _ = _derivatives(curve)
    w = _trapezoid_weights(curve.n, curve.topology)
    f = np.pi * curve.r**2 * xp
    return float(np.dot(w, f * curve.x3) / np.dot(w, f))


def arc_spacing(curve: InterfaceCurve) -> np.ndarray:
    """Chord lengths between consecutive nodes, including the two pole half-chords doubled."""
    re, xe = _extend(curve)
    return np.hypot(np.diff(re), np.diff(xe))


def salt_density(state: BrineState, params: ModelParams) -> np.ndarray:
    """Quasi-steady salt ``N0 = N_T exp(-delta_g x3) / int pi r^2 exp(-delta_g x3) dx3``."""
    curve = state.curve
    if curve.topology is not Topology.CLOSED:
        raise GeometryError("salt density needs a closed inclusion")
    integral = volume_integral(curve, params.delta_g)
    if not integral > 0:
        raise GeometryError("non-positive enclosed volume")
    return state.total_salt * np.exp(-params.delta_g * curve.x3) / integral


def normal_velocity(state: BrineState, thermal: ThermalProfile, params: ModelParams) -> np.ndarray:
    """``V = -curvature_sign * kappa0 + N0 + beta (Theta0 - 0 degC)`` per node."""
    kappa = curvature(state.curve)
    N0 = salt_density(state, params)
    return -params.curvature_sign * kappa + N0 + params.beta * thermal(state.curve.x3)


# --- backward Euler / Newton -------------------------------------------------------

def _ghost_maps(n: int):
    """Coefficients folding ghost nodes back onto real nodes (closed topology)."""
    # extended index e in [0, n+1] -> (real index, coefficient) for r and x
    r_map = [(0, -1.0)] + [(i, 1.0) for i in range(n)] + [(n - 1, -1.0)]
    x_map = [(0, 1.0)] + [(i, 1.0) for i in range(n)] + [(n - 1, 1.0)]
    return r_map, x_map


class _Assembler:
    """Residual and Jacobian of one implicit step with equidistributed nodes.

    Unknowns are interleaved ``[r_0, x_0, r_1, x_1, ...]``. Row ``2i`` is the
    normal-displacement equation at node ``i``; row ``2i+1`` equates the
    squared chord lengths on either side of node ``i``. Both depend only on
    nodes ``i-1, i, i+1`` so the local Jacobian has three bands either side;
    the volume-normalised salt couples all nodes through one rank-one term.
    """

    lower = 3
    upper = 3

    def __init__(self, old: InterfaceCurve, thermal: ThermalProfile, total_salt: float,
                 dtau: float, params: ModelParams):
        self.n = old.n
        self.h = 1.0 / old.n
        self.r_old = old.r
        self.x_old = old.x3
        self.thermal = thermal
        self.total_salt = total_salt
        self.dtau = dtau
        self.params = params
        self.weights = _trapezoid_weights(self.n, Topology.CLOSED)
        self.r_map, self.x_map = _ghost_maps(self.n)

    def unpack(self, z):
        return z[0::2], z[1::2]

    def residual(self, z):
        F, _, _, _ = self._evaluate(z, jacobian=False)
        return F

    def _evaluate(self, z, jacobian=True):
        p = self.params
        n, h, dt = self.n, self.h, self.dtau
        r, x = self.unpack(z)
        re = np.concatenate([[-r[0]], r, [-r[-1]]])
        xe = np.concatenate([[x[0]], x, [x[-1]]])
        rp = (re[2:] - re[:-2]) / (2 * h)
        xp = (xe[2:] - xe[:-2]) / (2 * h)
        rpp = (re[2:] - 2 * r + re[:-2]) / h**2
        xpp = (xe[2:] - 2 * x + xe[:-2]) / h**2
        q = rp**2 + xp**2
        if np.any(q < 1e-14) or np.any(r <= 0):
            raise GeometryError("degenerate curve during Newton iteration")
        J = np.sqrt(q)
        num = xp**3 + rp**2 * xp - r * rpp * xp + r * rp * xpp
        D = 2 * r * q**1.5
        kappa = -num / D

        ex = np.exp(-p.delta_g * x)
        integrand = np.pi * r**2 * ex * xp
        I = float(np.dot(self.weights, integrand))
        if not I > 0:
            raise GeometryError("non-positive enclosed volume during Newton iteration")
        N0 = self.total_salt * ex / I
        V = -p.curvature_sign * kappa + N0 + p.beta * self.thermal(x)

        dr = r - self.r_old
        dx = x - self.x_old
        a = (dr * xp - dx * rp) / J
        F = np.empty(2 * n)
        F[0::2] = a - dt * V
        seg = np.diff(re) ** 2 + np.diff(xe) ** 2  # n + 1 squared chords
        F[1::2] = (seg[1:] - seg[:-1]) * n**2
        if not jacobian:
            return F, None, None, None

        # local partials with respect to extended stencil values
        # order of the 6 local slots: r_{i-1}, r_i, r_{i+1}, x_{i-1}, x_i, x_{i+1}
        d1 = np.array([-0.5 / h, 0.0, 0.5 / h])
        d2 = np.array([1.0 / h**2, -2.0 / h**2, 1.0 / h**2])
        dnum_drp = 2 * rp * xp + r * xpp
        dnum_dxp = 3 * xp**2 + rp**2 - r * rpp
        dnum_drpp = -r * xp
        dnum_dxpp = r * rp
        dnum_dr = -rpp * xp + rp * xpp
        # dD = 2 q^1.5 dr + 3 r q^0.5 dq, dq = 2 rp drp + 2 xp dxp
        dD_dr = 2 * q**1.5
        dD_dq = 3 * r * np.sqrt(q)
        # dkappa = (-dnum - kappa dD) / D
        dk_drp = (-dnum_drp - kappa * dD_dq * 2 * rp) / D
        dk_dxp = (-dnum_dxp - kappa * dD_dq * 2 * xp) / D
        dk_drpp = -dnum_drpp / D
        dk_dxpp = -dnum_dxpp / D
        dk_dr = (-dnum_dr - kappa * dD_dr) / D

        da_drp = (-dx - a * rp / J) / J
        da_dxp = (dr - a * xp / J) / J

        sgn = p.curvature_sign
        # normal row: a - dt * (-sgn kappa + N0_local + beta b0 x)
        g_rp = da_drp + dt * sgn * dk_drp
        g_xp = da_dxp + dt * sgn * dk_dxp
        g_rpp = dt * sgn * dk_drpp
        g_xpp = dt * sgn * dk_dxpp
        g_r = xp / J + dt * sgn * dk_dr
        g_x = -rp / J - dt * (-p.delta_g * N0 + p.beta * self.thermal.b0)

        local_r = g_rp[:, None] * d1[None, :] + g_rpp[:, None] * d2[None, :]
        local_r[:, 1] += g_r
        local_x = g_xp[:, None] * d1[None, :] + g_xpp[:, None] * d2[None, :]
        local_x[:, 1] += g_x

        # equidistribution row: n^2 (seg_{i+1/2} - seg_{i-1/2})
        er = np.zeros((n, 3))
        ex_ = np.zeros((n, 3))
        drs = np.diff(re)
        dxs = np.diff(xe)
        # seg_{i+1/2} -> drs[i+1], seg_{i-1/2} -> drs[i]
        er[:, 2] = 2 * drs[1:]
        er[:, 1] = -2 * drs[1:] - 2 * drs[:-1]
        er[:, 0] = 2 * drs[:-1]
        ex_[:, 2] = 2 * dxs[1:]
        ex_[:, 1] = -2 * dxs[1:] - 2 * dxs[:-1]
        ex_[:, 0] = 2 * dxs[:-1]
        er *= n**2
        ex_ *= n**2

        bands = np.zeros((self.lower + self.upper + 1, 2 * n))

        def put(row, col, val):
            bands[self.upper + row - col, col] += val

        r_map, x_map = self.r_map, self.x_map
        for i in range(n):
            for k in range(3):
                e = i + k  # extended index of slot (i-1+k) shifted by one
                jr, cr = r_map[e]
                jx, cx = x_map[e]
                put(2 * i, 2 * jr, cr * local_r[i, k])
                put(2 * i, 2 * jx + 1, cx * local_x[i, k])
                put(2 * i + 1, 2 * jr, cr * er[i, k])
                put(2 * i + 1, 2 * jx + 1, cx * ex_[i, k])

        # rank-one salt coupling: row 2i gets -dt * dN0_i/dz = dt N0_i / I * dI/dz
        col = np.zeros(2 * n)
        col[0::2] = dt * N0 / I
        w = self.weights
        dI = np.zeros(2 * n)
        dI[0::2] += w * 2 * np.pi * r * ex * xp
        dI[1::2] += w * (-p.delta_g) * integrand
        coef = w * np.pi * r**2 * ex  # multiplies xp_i
        for i in range(n):
            for k, c in ((0, -0.5 / h), (2, 0.5 / h)):
                jx, cx = x_map[i + k]
                dI[2 * jx + 1] += coef[i] * c * cx
        return F, bands, col, dI

    def jacobian_dense(self, z):
        """Dense Jacobian (band plus rank-one), for verification."""
        _, bands, col, dI = self._evaluate(z)
        m = 2 * self.n
        A = np.zeros((m, m))
        for j in range(m):
            for i in range(max(0, j - self.upper), min(m, j + self.lower + 1)):
                A[i, j] = bands[self.upper + i - j, j]
        return A + np.outer(col, dI)

    def newton(self, z0):
        p = self.params
        z = z0.copy()
        res = math.inf
        # absolute on unit-size curves; grows with the coordinates so that long
        # curves are not asked for residuals below their round-off floor
        tol = p.newton_tol * max(1.0, float(np.max(np.abs(z0))))
        for _ in range(p.newton_max_iter + 1):
            F, bands, col, dI = self._evaluate(z)
            res = float(np.max(np.abs(F)))
            if not np.isfinite(res):
                break
            if res < tol:
                return z
            rhs = np.column_stack([F, col])
            try:
                sol = solve_banded((self.lower, self.upper), bands, rhs)
            except (np.linalg.LinAlgError, ValueError):
                break
            y, w = sol[:, 0], sol[:, 1]
            denom = 1.0 + dI @ w
            delta = y - w * (dI @ y) / denom
            if not np.all(np.isfinite(delta)):
                break
            # damp steps that would push a radius through the axis
            r_new = z[0::2] - delta[0::2]
            lam = 1.0
            while np.any(r_new <= 0) and lam > 1e-3:
                lam *= 0.5
                r_new = z[0::2] - lam * delta[0::2]
            z = z - lam * delta
        raise NewtonDivergence("Newton iteration failed to converge", res)


def _interleave(curve: InterfaceCurve) -> np.ndarray:
    z = np.empty(2 * curve.n)
    z[0::2] = curve.r
    z[1::2] = curve.x3
    return z


def step_backward_euler(state: BrineState, thermal: ThermalProfile, dtau: float,
                        params: ModelParams) -> BrineState:
    """One fully implicit step of the interface law.

    The normal displacement of every node equals ``dtau * V`` evaluated on the
    new curve (with the salt density normalised by the new volume); the
    tangential position of each node is fixed by requiring equal chord lengths
    along the curve. Raises ``NewtonDivergence`` on failure.
    """
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    if state.curve.topology is not Topology.CLOSED:
        raise GeometryError("evolution is implemented for closed inclusions")
    asm = _Assembler(state.curve, thermal, state.total_salt, dtau, params)
    z = asm.newton(_interleave(state.curve))
    r, x = asm.unpack(z)
    return BrineState(InterfaceCurve(r.copy(), x.copy()), state.total_salt, state.tau + dtau)


def equidistribute(curve: InterfaceCurve, params: ModelParams | None = None) -> InterfaceCurve:
    """Move nodes tangentially so that chords are equal, keeping the shape."""
    # zero-velocity implicit step: normal displacement zero, equal chords
    p = (params or ModelParams()).replace(curvature_sign=1)
    asm = _Assembler(curve, ThermalProfile(0.0), 1.0, 0.0, p)
    z = asm.newton(_interleave(curve))
    r, x = asm.unpack(z)
    return InterfaceCurve(r.copy(), x.copy())


# --- pinch detection -----------------------------------------------------------

def detect_pinch(state: BrineState, params: ModelParams) -> PinchEvent | None:
    """Report a pinch when an interior local minimum of ``r`` drops below ``r_pinch``."""
    r = state.curve.r
    s = state.curve.s_nodes
    interior = np.arange(1, r.size - 1)
    is_min = (r[interior] <= r[interior - 1]) & (r[interior] <= r[interior + 1])
    candidates = interior[is_min]
    if candidates.size == 0:
        return None
    i = int(candidates[np.argmin(r[candidates])])
    if r[i] >= params.r_pinch:
        return None
    # vertex of the parabola through the three nodes around the minimum
    y0, y1, y2 = r[i - 1], r[i], r[i + 1]
    denom = y0 - 2 * y1 + y2
    offset = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
    offset = float(np.clip(offset, -1.0, 1.0))
    h = 1.0 / r.size
    s_loc = float(s[i] + offset * h)
    x = state.curve.x3
    x_loc = float(x[i] + offset * (0.5 * (x[i + 1] - x[i - 1])) + 0.5 * offset**2 * (x[i + 1] - 2 * x[i] + x[i - 1]))
    r_min = y1 - (y0 - y2) ** 2 / (8.0 * denom) if denom > 0 else y1
    return PinchEvent(state.tau, s_loc, x_loc, float(max(r_min, 0.0)))


def interior_min_radius(curve: InterfaceCurve) -> tuple[float, int] | None:
    r = curve.r
    interior = np.arange(1, r.size - 1)
    is_min = (r[interior] <= r[interior - 1]) & (r[interior] <= r[interior + 1])
    candidates = interior[is_min]
    if candidates.size == 0:
        return None
    i = int(candidates[np.argmin(r[candidates])])
    return float(r[i]), i


# --- equilibrium pores ----------------------------------------------------------

class PoreRegime(str, enum.Enum):
    TAPERED = "tapered"
    OSCILLATORY = "oscillatory"
    PINCH_OFF = "pinch_off"


@dataclass
class PoreProfile:
    x3: np.ndarray
    r: np.ndarray
    dr: np.ndarray
    salt: float
    reason: str  # "x3_max", "pinch" or "turning_point"
    r0: float
    x3_end: float
    solution: object = field(default=None, repr=False)


def equilibrium_pore(r0: float, a0: float, b0: float, x3_max: float, params: ModelParams,
                     slope_max: float = 1e6) -> PoreProfile:
    """Radius profile of a steady open pore, integrated upward from ``x3 = 0``.

    Solves ``kappa0(r) = curvature_sign * (N0 + beta * Theta0(x3))`` with
    ``r(0) = r0``, ``r'(0) = 0`` as an initial value problem (Dormand-Prince 5(4)).
    Here ``b0`` is the *cooling rate with height* in degC/mm, i.e.
    ``Theta0(x3) = a0 - b0 * x3``: field gradients of 1.5-15 degC/m are
    ``b0 = 0.0015 ... 0.015``. ``N0`` is the constant that makes ``r''(0) = 0``.

    Termination reasons: ``"x3_max"``; ``"pinch"`` when ``r`` falls below
    ``params.r_pinch``; ``"turning_point"`` when ``|r'|`` exceeds ``slope_max``
    (the graph description of the pore breaks down at a vertical tangent).
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    beta = params.beta
    sgn = params.curvature_sign
    # at x3=0 with r'=r''=0: kappa0 = -1/(2 r0) = sgn * (N0 + beta a0)
    salt = -sgn / (2.0 * r0) - beta * a0

    def rhs(x, y):
        r, p = y
        forcing = sgn * (salt + beta * (a0 - b0 * x))
        g = 1.0 + p * p
        return [p, (g + 2.0 * r * g**1.5 * forcing) / r]

    def hit_axis(x, y):
        return y[0] - params.r_pinch

    def vertical(x, y):
        return abs(y[1]) - slope_max

    hit_axis.terminal = True
    hit_axis.direction = -1
    vertical.terminal = True
    vertical.direction = 1

    sol = solve_ivp(rhs, (0.0, x3_max), [r0, 0.0], method="RK45", rtol=params.ivp_rtol,
                    atol=params.ivp_rtol * 1e-3, events=[hit_axis, vertical], dense_output=True)
    x = sol.t
    r, dr = sol.y
    if sol.status == 1 and sol.t_events[0].size:
        reason = "pinch"
    elif sol.status == 1 and sol.t_events[1].size:
        reason = "turning_point"
    elif sol.status == -1:
        # step size collapsed: the slope is blowing up faster than the event can resolve
        if abs(dr[-1]) > 1e3:
            reason = "turning_point"
        else:
            raise RuntimeError(f"equilibrium pore integration failed: {sol.message}")
    else:
        reason = "x3_max"
    return PoreProfile(x, r, dr, salt, reason, r0, float(x[-1]), sol)


def pore_rebounds(profile: PoreProfile, min_rebound: float = 0.04) -> int:
    """Number of local minima of ``r`` followed by a rise larger than ``min_rebound * r0``."""
    dr = profile.dr
    r = profile.r
    sign = np.sign(dr)
    nz = np.nonzero(sign)[0]
    if nz.size < 2:
        return 0
    sign_nz = sign[nz]
    changes = nz[1:][np.diff(sign_nz) != 0]
    extrema = [(i, r[i]) for i in changes]
    count = 0
    for (i0, ra), (i1, rb) in zip(extrema, extrema[1:]):
        if dr[i0] > 0 and rb - ra > min_rebound * profile.r0:
            count += 1
    return count


def classify_pore_regime(profile: PoreProfile, min_rebound: float = 0.04) -> PoreRegime:
    """PinchOff if the pore closes (axis reached or the neck turns vertical
    while narrowing); Oscillatory if ``r'`` changes sign at least twice with a
    visible rebound; otherwise Tapered.

    Rebounds smaller than ``min_rebound * r0`` are treated as ripples on a
    tapering profile.
    """
    if profile.reason == "pinch":
        return PoreRegime.PINCH_OFF
    if profile.reason == "turning_point" and profile.dr[-1] < 0:
        return PoreRegime.PINCH_OFF
    if pore_rebounds(profile, min_rebound) >= 1:
        return PoreRegime.OSCILLATORY
    return PoreRegime.TAPERED


# --- drift ----------------------------------------------------------------------

def drift_velocity(trajectory) -> float:
    """Least-squares slope of the centroid height against ``tau``."""
    states = list(trajectory)
    if len(states) < 3:
        raise ValueError("drift velocity needs at least 3 frames")
    tau = np.array([s.tau for s in states])
    zc = np.array([centroid_height(s.curve) for s in states])
    slope, _ = np.polyfit(tau - tau.mean(), zc, 1)
    return float(slope)


# --- spherical oracle -------------------------------------------------------------

def sphere_radius_rate(R: float, total_salt: float, delta_theta: float, params: ModelParams) -> float:
    """``dR/dtau`` for an exact sphere (no stratification)."""
    return params.curvature_sign / R + total_salt / (4.0 / 3.0 * np.pi * R**3) + params.beta * delta_theta


def sphere_radius_oracle(R0: float, total_salt: float, delta_theta: float, tau_end: float,
                         params: ModelParams, rtol: float = 1e-12) -> float:
    sol = solve_ivp(lambda t, y: [sphere_radius_rate(y[0], total_salt, delta_theta, params)],
                    (0.0, tau_end), [R0], method="DOP853", rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise RuntimeError(sol.message)
    return float(sol.y[0, -1])


def equilibrium_sphere_salt(R: float, delta_theta: float, params: ModelParams) -> float:
    """Salt density ``N0`` holding a sphere of radius ``R`` at rest."""
    return -params.curvature_sign / R - params.beta * delta_theta


# --- time integration driver ----------------------------------------------------------

@dataclass
class Evolution:
    final: BrineState
    frames: list[BrineState]
    pinch: PinchEvent | None
    steps: int
    rejected: int


def _thermal_at(schedule, tau: float) -> ThermalProfile:
    current = schedule[0][1]
    for start, profile in schedule:
        if tau + 1e-12 >= start:
            current = profile
    return current


def evolve(state: BrineState, schedule, tau_end: float, dtau: float, params: ModelParams,
           frame_taus=(), stop_on_pinch: bool = True, dtau_min: float = 1e-10,
           neck_factor: float = 0.25, max_steps: int = 200_000) -> Evolution:
    """Advance ``state`` to ``tau_end`` with backward Euler steps of at most ``dtau``.

    ``schedule`` is a list of ``(tau_start, ThermalProfile)`` pairs with the
    first entry at the initial time; steps are clipped so that schedule
    switches and requested frame times are hit exactly. A rejected Newton
    solve halves the step. Near a thinning neck of radius ``rho`` the step is
    also capped at ``neck_factor * rho**2`` (the implicit cylinder-collapse
    equation has no real root for larger steps). More than ``max_steps``
    attempted steps raises :class:`NewtonDivergence`.
    """
    schedule = sorted(schedule, key=lambda item: item[0])
    breaks = sorted({t for t, _ in schedule} | {float(t) for t in frame_taus} | {tau_end})
    breaks = [t for t in breaks if t > state.tau + 1e-12 and t <= tau_end + 1e-12]
    frames = []
    if any(abs(t - state.tau) < 1e-12 for t in frame_taus):
        frames.append(state)
    current = state
    dt_try = dtau
    steps = rejected = 0
    pinch = None
    for target in breaks:
        while current.tau < target - 1e-12:
            if steps + rejected >= max_steps:
                raise NewtonDivergence(f"step budget of {max_steps} exhausted at tau={current.tau:.6g}",
                                       math.nan)
            thermal = _thermal_at(schedule, current.tau)
            dt = min(dt_try, target - current.tau)
            neck = interior_min_radius(current.curve)
            if neck is not None and neck[0] < 0.1:
                dt = min(dt, max(neck_factor * neck[0] ** 2, dtau_min))
            try:
                new = step_backward_euler(current, thermal, dt, params)
            except (NewtonDivergence, GeometryError) as exc:
                rejected += 1
                dt_try = 0.5 * dt
                if dt_try < dtau_min:
                    event = detect_pinch(current, params.replace(r_pinch=max(params.r_pinch, 0.05)))
                    if event is not None:
                        pinch = event
                        break
                    raise NewtonDivergence(f"step size underflow at tau={current.tau:.6g}",
                                           getattr(exc, "residual", math.nan)) from exc
                continue
            if dt_try < dtau and steps % 2 == 0:
                dt_try = min(dtau, 2.0 * dt_try)  # recover after a rejection
            if abs(new.tau - target) < 1e-9:
                new = BrineState(new.curve, new.total_salt, target)  # no round-off drift at breaks
            current = new
            steps += 1
            event = detect_pinch(current, params)
            if event is not None:
                pinch = event
                if stop_on_pinch:
                    break
        if pinch is not None and stop_on_pinch:
            break
        if any(abs(t - current.tau) < 1e-9 for t in frame_taus):
            frames.append(current)
    return Evolution(current, frames, pinch, steps, rejected)

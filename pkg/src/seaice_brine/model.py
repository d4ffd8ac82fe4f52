"""Scalar model functions and the calibrated parameter table.

Temperature conventions
-----------------------
The phase-field functions (``latent_b``, ``latent_B``, ``v1``, ``internal_energy_density``,
``entropy_density``) work in absolute temperature (Kelvin) with ``theta_star = 273``.
The axisymmetric Stefan reduction works in degrees Celsius, where the
freezing point of pure water is 0; it only ever uses the offset ``Theta - theta*``
and never reads ``ModelParams.theta_star``.

Salt is measured in percent weight, so ``beta = 1.85`` reproduces the
cryoscopic slope of roughly 0.54 degC per 1 % salt.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class DomainError(ValueError):
    """Raised when a model function is evaluated outside its domain."""


# Physical constants quoted alongside the scaled model. The scaled model uses
# e_N = e_1 = e_s, so these only travel as metadata.
TABLE_OF_PARAMETERS: dict[str, dict[str, Any]] = {
    "rho_0": {"name": "Water density", "value": 1000.0, "units": "kg/m^3"},
    "c_s": {"name": "Specific heat of ice", "value": 2050.0, "units": "J/(K kg)"},
    "S_e": {"name": "NaCl salt in water molar entropy", "value": 43.4, "units": "J/(K mol)"},
    "m_0": {"name": "Water molar density", "value": 5.55e4, "units": "mol/m^3"},
    "g": {"name": "Gravitational constant", "value": 9.8, "units": "m/s^2"},
    "theta_star": {"name": "Reference temperature", "value": 273.0, "units": "K"},
    "beta": {"name": "Cryoscopic parameter", "value": 1.85, "units": "1/K"},
    "e_s": {"name": "Thermal entropy coefficient", "value": 2.5e6, "units": "J/(K m^3)"},
    "e_N": {"name": "Salt entropy coefficient", "value": 2.41e6, "units": "J/(K m^3)"},
    "e_g": {"name": "Gravitational entropy coefficient", "value": 2.98e-2, "units": "J/(K m^3)"},
    "e_1": {"name": "Latent heat coefficient", "value": 1.2e7, "units": "J/(K m^3)"},
    "L_b": {"name": "Brine inclusion length scale", "value": 1e-3, "units": "m"},
    "L_li": {"name": "Liquid-ice interface length scale", "value": 1e-9, "units": "m"},
    "delta_g": {"name": "Density stratification ratio", "value": 1.23e-8, "units": "-"},
    "H": {"name": "Ratio of interface to inclusion lengths", "value": 1e6, "units": "-"},
}


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical constants.

    Attributes
    ----------
    beta : cryoscopic coefficient [1/K], salt in % weight.
    theta_star : freezing point of pure water in Kelvin (phase-field module only).
    delta_g : salt stratification ratio (dimensionless).
    H : ratio of inclusion to interface length scales.
    sigma_theta, sigma_N : thermal and salt mobilities (scaled).
    length_scale_Lb : metres per scaled length unit (1 mm).
    curvature_sign : orientation of the curvature term in the interface law,
        ``V = -curvature_sign * kappa0 + xi``. ``+1`` is the law as written with
        ``kappa0 = -1/R`` on a sphere; ``-1`` makes curvature shrink convex
        inclusions (well-posed evolution). See README.
    """

    beta: float = 1.85
    theta_star: float = 273.0
    delta_g: float = 1.23e-8
    H: float = 1e6
    sigma_theta: float = 1.0
    sigma_N: float = 1.0
    length_scale_Lb: float = 1e-3
    curvature_sign: int = 1
    # numerics
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    r_pinch: float = 1e-3
    mobility_floor: float = 1e-8
    cfl: float = 0.4
    ivp_rtol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.H >= 1:
            raise ValueError(f"H must be >= 1, got {self.H}")
        if not self.delta_g >= 0:
            raise ValueError(f"delta_g must be >= 0, got {self.delta_g}")
        if not (self.sigma_theta > 0 and self.sigma_N > 0):
            raise ValueError("mobilities sigma_theta and sigma_N must be positive")
        if not self.length_scale_Lb > 0:
            raise ValueError("length_scale_Lb must be positive")
        if self.curvature_sign not in (1, -1):
            raise ValueError(f"curvature_sign must be +1 or -1, got {self.curvature_sign}")
        if not (self.newton_tol > 0 and self.newton_max_iter >= 1):
            raise ValueError("invalid Newton settings")
        if not self.r_pinch > 0:
            raise ValueError("r_pinch must be positive")
        if not self.mobility_floor > 0:
            raise ValueError("mobility_floor must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.ivp_rtol > 0:
            raise ValueError("ivp_rtol must be positive")

    @classmethod
    def defaults(cls) -> "ModelParams":
        return cls()

    def replace(self, **changes: Any) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelParams":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise KeyError(f"unknown ModelParams key(s): {', '.join(unknown)}")
        coerced = {}
        for key, value in data.items():
            kind = int if known[key].type in ("int", int) else float
            coerced[key] = kind(value)
        return cls(**coerced)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


# --- double-well potentials -------------------------------------------------

def w0(phi):
    return 18.0 * phi**2 * (1.0 - phi) ** 2


def w0_prime(phi):
    return 36.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)


def w0_second(phi):
    return 36.0 * (1.0 - 6.0 * phi + 6.0 * phi**2)


def w1(phi):
    """Tilt potential, ``2 phi^2 (phi - 3/2)``; ``w1(1) = -1``."""
    return 2.0 * phi**2 * (phi - 1.5)


def w1_prime(phi):
    return 6.0 * phi * (phi - 1.0)


# --- cryoscopic and latent-heat terms ---------------------------------------

def cryoscopic_xi(theta, N, params: ModelParams, theta_star: float | None = None):
    """Linear cryoscopic term ``N + beta (theta - theta*)``.

    Positive values promote melting. ``theta_star`` defaults to
    ``params.theta_star`` (Kelvin); pass ``0.0`` for Celsius temperatures.
    """
    ts = params.theta_star if theta_star is None else theta_star
    return N + params.beta * (theta - ts)


def latent_b(theta, params: ModelParams):
    return 0.5 * params.beta * (theta**2 - params.theta_star**2)


def latent_b_prime(theta, params: ModelParams):
    return params.beta * theta


def latent_B(theta, params: ModelParams):
    """``b(theta) / theta``; increasing on ``theta > 0`` (Kelvin)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise DomainError("latent_B requires a positive absolute temperature")
    out = 0.5 * params.beta * (theta**2 - params.theta_star**2) / theta
    return float(out) if out.ndim == 0 else out


def v1(phi, theta, rho, params: ModelParams):
    """Salt-modified tilt ``B(theta) W1(phi) - rho phi exp(-W1(phi))``."""
    return latent_B(theta, params) * w1(phi) - rho * phi * np.exp(-w1(phi))


def v1_dphi(phi, theta, rho, params: ModelParams):
    return latent_B(theta, params) * w1_prime(phi) - rho * np.exp(-w1(phi)) * (1.0 - phi * w1_prime(phi))


def salt_weight(phi):
    """Liquid-water weight ``phi exp(-W1(phi))`` relating N to rho."""
    return phi * np.exp(-w1(phi))


def internal_energy_density(theta, phi, params: ModelParams):
    return theta - latent_b(theta, params) * w1(phi)


def internal_energy_dtheta(theta, phi, params: ModelParams):
    return 1.0 - params.beta * theta * w1(phi)


def _salt_entropy(N, phi):
    """``N (1 - ln(N/phi))`` with the continuous value 0 at ``N = 0``."""
    N = np.asarray(N, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any((N > 0) & (phi <= 0)):
        raise DomainError("salt present where phi <= 0")
    if np.any(N < 0):
        raise DomainError("negative salt density")
    pos = N > 0
    safe_N = np.where(pos, N, 1.0)
    safe_phi = np.where(pos, phi, 1.0)
    return np.where(pos, N * (1.0 - np.log(safe_N / safe_phi)), 0.0)


def entropy_density(grad_phi_sq, phi, theta, N, x3, params: ModelParams):
    """Scaled entropy density (Kelvin temperatures).

    ``ln theta + N (1 - ln(N/phi)) - delta_g N x3 - |grad phi|^2 / (2H)
    - H W0(phi) - W1(phi) xi(theta, N)``.

    The gradient weight ``1/(2H)`` is the one whose variation yields the
    ``Laplacian(phi)/H`` term of the phase equation.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise DomainError("entropy requires a positive absolute temperature")
    H = params.H
    xi = cryoscopic_xi(theta, N, params)
    s = (
        np.log(theta)
        + _salt_entropy(N, phi)
        - params.delta_g * N * x3
        - grad_phi_sq / (2.0 * H)
        - H * w0(phi)
        - w1(phi) * xi
    )
    return float(s) if np.ndim(s) == 0 else s


# --- sharp-interface front ---------------------------------------------------

def front_profile(z):
    """Heteroclinic of ``Phi'' = W0'(Phi)`` with ``Phi(-inf)=1``, ``Phi(+inf)=0``."""
    return 0.5 * (1.0 - np.tanh(3.0 * z))


def _sech2(a):
    e = np.exp(-2.0 * np.abs(a))
    return 4.0 * e / (1.0 + e) ** 2


def front_profile_prime(z):
    return -1.5 * _sech2(3.0 * z)


def front_profile_second(z):
    return 9.0 * np.tanh(3.0 * z) * _sech2(3.0 * z)


def front_profile_norm_sq() -> float:
    """``int Phi'(z)^2 dz``; equals 1 for the normalised ``W0``."""
    # int (9/4) sech^4(3z) dz = (9/4) * (4/3) / 3
    return 1.0

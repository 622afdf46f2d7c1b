"""Temperature dependence of the model: cavity and exciton energies, phonon rate, regions"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from .errors import NoCrossingError
from .operators import SystemParams

logger = logging.getLogger(__name__)

REGION_I_MAX = 0.1
REGION_II_MAX = 0.8


@dataclass(frozen=True)
class ThermalModel:
    omega_c0: float   # meV
    a_idx: float      # 1/K
    E_g0: float       # meV
    alpha_v: float    # meV/K
    beta_v: float     # K
    P_tilde: float    # meV
    A: float
    B: float          # 1/K
    T_prime: float    # K

    def __post_init__(self):
        if self.A <= 0 or self.B <= 0:
            raise ValueError(f"A and B must be > 0, got A={self.A}, B={self.B}")
        if self.P_tilde < 0:
            raise ValueError(f"P_tilde must be >= 0, got {self.P_tilde}")
        if self.beta_v <= 0:
            raise ValueError(f"beta_v must be > 0, got {self.beta_v}")

    def replace(self, **changes) -> ThermalModel:
        return ThermalModel(**{**self.__dict__, **changes})


DEVICE_MODEL = ThermalModel(
    omega_c0=1043.27,
    a_idx=0.852e-5,
    E_g0=1044.5,
    alpha_v=0.7,
    beta_v=590.0,
    P_tilde=0.45,
    A=0.5,
    B=0.2,
    T_prime=30.0,
)


@dataclass(frozen=True)
class ResonancePoint:
    T0: float
    omega0: float


class Region(str, Enum):
    I = "I"
    II = "II"
    III = "III"


def _check_temperature(T: float) -> None:
    if T < 0:
        raise ValueError(f"temperature must be >= 0 K, got {T}")


def cavity_energy(T: float, m: ThermalModel) -> float:
    """omega_c(T) = omega_c(0) / (1 + a T)"""
    _check_temperature(T)
    return m.omega_c0 / (1.0 + m.a_idx * T)


def exciton_energy(T: float, m: ThermalModel) -> float:
    """Varshni law E_g(0) - alpha T^2 / (T + beta)"""
    _check_temperature(T)
    return m.E_g0 - m.alpha_v * T * T / (T + m.beta_v)


def detuning(T: float, m: ThermalModel) -> float:
    return exciton_energy(T, m) - cavity_energy(T, m)


def phonon_rate(T: float, m: ThermalModel) -> float:
    """S-shaped phonon-mediated rate P_tilde / (1 + A exp(-B (T - T')))"""
    _check_temperature(T)
    exponent = -m.B * (T - m.T_prime)
    # 1/(1 + A e^x) written to stay finite for large |x|
    if exponent > 0:
        e = math.exp(-exponent)
        return m.P_tilde * e / (e + m.A)
    return m.P_tilde / (1.0 + m.A * math.exp(exponent))


def resonance_temperature(
    m: ThermalModel,
    T_lo: float = 0.0,
    T_hi: float = 300.0,
    scan_points: int = 601,
) -> ResonancePoint:
    """Root of omega_c(T) = omega_x(T) by a coarse scan followed by bisection"""
    grid = np.linspace(T_lo, T_hi, scan_points)
    diff = np.array([detuning(T, m) for T in grid])
    if np.all(diff == 0):
        raise NoCrossingError("cavity and exciton curves coincide; no isolated crossing")
    exact = np.flatnonzero(diff == 0)
    if exact.size:
        T0 = float(grid[exact[0]])
        return ResonancePoint(T0=T0, omega0=cavity_energy(T0, m))
    sign_change = np.flatnonzero(np.sign(diff[:-1]) != np.sign(diff[1:]))
    if not sign_change.size:
        raise NoCrossingError(f"no crossing of cavity and exciton energies in [{T_lo}, {T_hi}] K")
    if sign_change.size > 1:
        logger.warning(f"{sign_change.size} crossings found, using the lowest temperature one")
    i = sign_change[0]
    T0 = optimize.bisect(lambda T: detuning(T, m), grid[i], grid[i + 1], xtol=1e-13, maxiter=200)
    omega0 = cavity_energy(T0, m)
    logger.debug(f"resonance at T0={T0:.6f} K, omega0={omega0:.6f} meV")
    return ResonancePoint(T0=float(T0), omega0=float(omega0))


def classify_region(P_theta: float, m: ThermalModel) -> Region:
    """Region I below 0.1 P_tilde, III from 0.8 P_tilde; boundaries go to the higher region"""
    if m.P_tilde == 0:
        return Region.I
    ratio = P_theta / m.P_tilde
    if ratio < REGION_I_MAX:
        return Region.I
    if ratio < REGION_II_MAX:
        return Region.II
    return Region.III


def region_temperatures(m: ThermalModel) -> tuple[float, float]:
    """Temperatures where P_theta / P_tilde reaches 0.1 and 0.8 (may be negative)"""
    def inverse(ratio: float) -> float:
        return m.T_prime - math.log((1.0 / ratio - 1.0) / m.A) / m.B

    return inverse(REGION_I_MAX), inverse(REGION_II_MAX)


def system_params_at(T: float, base: SystemParams, m: ThermalModel) -> SystemParams:
    """Bind omega_c(T), omega_x(T) and P_theta(T) into a copy of `base`"""
    return base.replace(
        omega_c=cavity_energy(T, m),
        omega_x=exciton_energy(T, m),
        P_theta=phonon_rate(T, m),
    )

"""Constitutive laws for the generalized polytropic gas.

Pressure, squared sound speed, specific enthalpy (relative to the reference
density) and Mach-number classification.  All operations are pure, accept
scalars or numpy arrays, and validate the density against the admissible set
of the law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InternalError, RangeError


class GasVariant(enum.Enum):
    STANDARD = "standard"
    DARK_ENERGY = "dark-energy"


class Regime(enum.IntEnum):
    SUBSONIC = 0
    SONIC = 1
    SUPERSONIC = 2


@dataclass(frozen=True)
class GasLaw:
    """Immutable constitutive parameters (a, gamma, rho_floor, variant).

    Standard law:     p = (a^2/gamma) (rho^gamma - rho_floor^gamma)
    Dark-energy law:  p = -a^2 (rho^gamma - rho_floor^gamma), gamma in [-1, 0)
    """

    a: float = 1.0
    gamma: float = 2.0
    rho_floor: float = 0.0
    variant: GasVariant = GasVariant.STANDARD

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"a must be positive, got {self.a}")
        if not math.isfinite(self.gamma) or self.gamma < -1 or self.gamma == 0:
            raise DomainError(
                f"gamma must lie in [-1, inf) \\ {{0}}, got {self.gamma}"
            )
        if self.rho_floor < 0 or not math.isfinite(self.rho_floor):
            raise DomainError(f"rho_floor must be >= 0, got {self.rho_floor}")
        if self.gamma < 1 and self.rho_floor <= 0:
            raise DomainError("rho_floor must be positive when gamma < 1")
        if self.variant is GasVariant.DARK_ENERGY and not (-1 <= self.gamma < 0):
            raise DomainError("dark-energy variant requires gamma in [-1, 0)")

    def _check_rho(self, rho):
        rho = np.asarray(rho, dtype=float)
        if not np.all(np.isfinite(rho)):
            raise DomainError("density must be finite")
        if self.gamma < 1:
            if np.any(rho <= self.rho_floor):
                raise DomainError(
                    f"density must exceed rho_floor={self.rho_floor} for gamma < 1"
                )
        else:
            if np.any(rho < self.rho_floor):
                raise DomainError(
                    f"density must be >= rho_floor={self.rho_floor}"
                )
            if np.any(rho <= 0):
                raise DomainError("density must be positive")
        return rho


def _maybe_scalar(x, arr):
    return float(arr) if np.isscalar(x) or np.ndim(x) == 0 else arr


def pressure(law: GasLaw, rho):
    """Pressure p(rho); zero at the reference density."""
    r = law._check_rho(rho)
    g = law.gamma
    if law.variant is GasVariant.DARK_ENERGY:
        p = -law.a ** 2 * (r ** g - law.rho_floor ** g)
    else:
        p = law.a ** 2 / g * (r ** g - law.rho_floor ** g)
    return _maybe_scalar(rho, p)


def sound_speed_sq(law: GasLaw, rho):
    """Squared sound speed c^2 = p'(rho); strictly positive."""
    r = law._check_rho(rho)
    g = law.gamma
    if law.variant is GasVariant.DARK_ENERGY:
        c2 = -law.a ** 2 * g * r ** (g - 1.0)
    elif g == 1.0:
        c2 = law.a ** 2 * np.ones_like(r)
    else:
        c2 = law.a ** 2 * r ** (g - 1.0)
    if np.any(c2 <= 0):
        raise InternalError("computed c^2 <= 0 for admissible density")
    return _maybe_scalar(rho, c2)


def enthalpy(law: GasLaw, rho):
    """Specific enthalpy H(rho) = int_{rho_floor}^{rho} p'(z)/z dz."""
    r = law._check_rho(rho)
    g = law.gamma
    rf = law.rho_floor
    if law.variant is GasVariant.DARK_ENERGY:
        h = -law.a ** 2 * g * (r ** (g - 1.0) - rf ** (g - 1.0)) / (g - 1.0)
    elif g == 1.0:
        if rf <= 0:
            raise DomainError("enthalpy for gamma = 1 needs rho_floor > 0 as anchor")
        h = law.a ** 2 * np.log(r / rf)
    else:
        h = law.a ** 2 * (r ** (g - 1.0) - rf ** (g - 1.0)) / (g - 1.0)
    return _maybe_scalar(rho, h)


def enthalpy_inverse(law: GasLaw, h):
    """Density with enthalpy(law, rho) = h, by closed-form inversion."""
    hv = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(hv)):
        raise RangeError("enthalpy must be finite")
    g = law.gamma
    rf = law.rho_floor
    if law.variant is GasVariant.DARK_ENERGY:
        inner = -hv * (g - 1.0) / (law.a ** 2 * g) + rf ** (g - 1.0)
        if np.any(inner <= 0):
            raise RangeError("enthalpy outside attainable range")
        rho = inner ** (1.0 / (g - 1.0))
    elif g == 1.0:
        if rf <= 0:
            raise DomainError("enthalpy for gamma = 1 needs rho_floor > 0 as anchor")
        rho = rf * np.exp(hv / law.a ** 2)
    else:
        inner = hv * (g - 1.0) / law.a ** 2 + rf ** (g - 1.0)
        if np.any(inner <= 0):
            raise RangeError("enthalpy outside attainable range")
        rho = inner ** (1.0 / (g - 1.0))
    # Admissibility of the result mirrors the density precondition.
    if g < 1:
        if np.any(rho <= rf):
            raise RangeError("enthalpy outside attainable range")
    elif np.any(rho < rf):
        raise RangeError("enthalpy outside attainable range")
    return _maybe_scalar(h, rho)


def mach(speed, c, tol_sonic: float = 1e-12):
    """Mach ratio and regime classification with a relative sonic band."""
    if c <= 0:
        raise DomainError(f"sound speed must be positive, got {c}")
    if speed < 0:
        raise DomainError("speed must be non-negative")
    m = speed / c
    if abs(m - 1.0) <= tol_sonic:
        regime = Regime.SONIC
    elif m < 1.0:
        regime = Regime.SUBSONIC
    else:
        regime = Regime.SUPERSONIC
    return m, regime

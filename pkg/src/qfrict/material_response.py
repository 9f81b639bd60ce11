"""Half-space optical response and atom parameters.

Everything downstream samples the surface through the imaginary part of the
non-retarded reflection coefficient, a single Lorentzian pole at the surface
plasmon: Im R(w) = (w * Gamma * wp^2 / 2) / ((w^2 - wS^2)^2 + w^2 Gamma^2),
extended oddly to w < 0.  Units: hbar = 1 throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialParams",
    "AtomParams",
    "im_reflection",
    "im_reflection_slope0",
    "coupling_density",
    "drude_consistency",
]


@dataclass(frozen=True)
class MaterialParams:
    """Drude/plasmon triple (plasma frequency, plasmon resonance, linewidth)."""

    omega_p: float
    omega_s: float
    gamma_damp: float

    def __post_init__(self):
        if not (self.omega_p > 0 and self.omega_s > 0 and self.gamma_damp > 0):
            raise ValueError("omega_p, omega_s and gamma_damp must all be positive")

    @property
    def narrow_resonance(self) -> bool:
        """True when closed-form narrow-plasmon approximations apply."""
        return self.gamma_damp / self.omega_s < 0.2


@dataclass(frozen=True)
class AtomParams:
    """Two-level-manifold atom: Bohr frequency, static polarizability, height."""

    omega0: float
    alpha0: float
    z: float

    def __post_init__(self):
        if not (self.omega0 > 0 and self.alpha0 > 0 and self.z > 0):
            raise ValueError("omega0, alpha0 and z must all be positive")

    @property
    def dipole_sq(self) -> float:
        """Transition dipole squared, d^2 = alpha * Omega / 2 (hbar = 1)."""
        return 0.5 * self.alpha0 * self.omega0


def im_reflection(omega, m: MaterialParams):
    """Im R(omega) of the half-space; odd in omega, positive for omega > 0."""
    w = np.asarray(omega, dtype=float)
    num = w * m.gamma_damp * m.omega_p**2 / 2.0
    den = (w * w - m.omega_s**2) ** 2 + (w * m.gamma_damp) ** 2
    out = num / den
    return out if out.ndim else float(out)


def im_reflection_slope0(m: MaterialParams) -> float:
    """Ohmic slope d(Im R)/dw at w = 0: Gamma * wp^2 / (2 wS^4)."""
    return m.gamma_damp * m.omega_p**2 / (2.0 * m.omega_s**4)


def im_reflection_slope0_fd(m: MaterialParams, step_frac: float = 1e-5) -> float:
    """Central-difference cross-check of the Ohmic slope (step h = frac*wS)."""
    h = step_frac * m.omega_s
    return float(im_reflection(h, m) - im_reflection(-h, m)) / (2.0 * h)


def coupling_density(kmag, omega, z: float, m: MaterialParams):
    """Squared surface-mode coupling |phi_{k,w}|^2 = e^{-2kz} Im R(w) / (2 pi^2 k)."""
    k = np.asarray(kmag, dtype=float)
    if np.any(k <= 0.0):
        raise ValueError("kmag must be positive")
    if z <= 0.0:
        raise ValueError("z must be positive")
    out = np.exp(-2.0 * k * z) / (2.0 * np.pi**2 * k) * im_reflection(omega, m)
    return out if out.ndim else float(out)


def drude_consistency(m: MaterialParams) -> float:
    """Relative distance of omega_s from the Drude value omega_p/sqrt(2).

    Diagnostic only: the resonance position is an independent input here.
    """
    return abs(m.omega_s - m.omega_p / np.sqrt(2.0)) / m.omega_s

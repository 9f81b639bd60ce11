"""Time-dependent perturbation-theory amplitudes for the launched atom.

The one-photon amplitude A(e,kappa;t) is the phase integral of the coupling
along the path; after the launch it splits into an adiabatic piece plus the
velocity-linear boost amplitude B whose squared modulus drives the
launch-dependent powers.  Ground-state rate and shift, and the boost
excitation probability p_e, live here as well.  hbar = 1.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .material_response import AtomParams, MaterialParams, im_reflection
from .quadrature import (
    DEFAULT_SPEC,
    QuadSpec,
    QuadratureError,
    damped_rational_map,
    integrate_nd,
    integrate_oscillatory,
    integrate_semiinf_algebraic,
)
from .trajectory import Trajectory, shape_factor

__all__ = [
    "ModeIndex",
    "LaunchAmplitude",
    "RegularizationParams",
    "ResonantPairError",
    "amplitude_B",
    "amplitude_A_oracle",
    "amplitude_A_late",
    "amplitude_M_asymptotic",
    "gamma_ground",
    "lamb_shift_ground",
    "excitation_probability",
]


class ResonantPairError(ArithmeticError):
    """Exactly resonant photon pair: use the rate-based power operations."""


@dataclass(frozen=True)
class ModeIndex:
    """Surface-mode label: in-plane wavevector (2-vector) and frequency."""

    k: tuple[float, float]
    omega: float

    def __post_init__(self):
        if self.omega < 0.0:
            raise ValueError("mode frequency must be >= 0")

    @property
    def kmag(self) -> float:
        return math.hypot(self.k[0], self.k[1])

    def doppler(self, v) -> float:
        """Co-moving frequency omega' = omega - k.v (v scalar means v*x_hat)."""
        if np.ndim(v) == 0:
            return self.omega - self.k[0] * float(v)
        return self.omega - self.k[0] * v[0] - self.k[1] * v[1]


@dataclass(frozen=True)
class LaunchAmplitude:
    """Non-adiabatic boost amplitude B_{e,kappa} (phase e^{-i k.r(0)} included)."""

    b_value: complex
    b_abs2: float


@dataclass(frozen=True)
class RegularizationParams:
    """Finite realisation of the adiabatic switching parameter lambda.

    Production evaluations keep lambda <= 1e-4 * Omega; where lambda enters,
    results are Richardson-extrapolated to zero over the ladder.
    """

    lambda_frac: float = 1e-6
    ladder_frac: tuple[float, ...] = (1e-5, 3e-6, 1e-6)

    def __post_init__(self):
        if not (0.0 < self.lambda_frac <= 1e-4):
            raise ValueError("lambda_adiabatic must satisfy 0 < lambda <= 1e-4*Omega")

    def lambda_adiabatic(self, atom: AtomParams) -> float:
        return self.lambda_frac * atom.omega0

    def ladder(self, atom: AtomParams) -> np.ndarray:
        return np.asarray(self.ladder_frac) * atom.omega0


def amplitude_B(kappa: ModeIndex, traj: Trajectory, atom: AtomParams) -> LaunchAmplitude:
    """Boost amplitude B = i (k.v) e^{-i k.r(0)} Sigma((Omega+w)tau) / (Omega+w)^2."""
    nu = atom.omega0 + kappa.omega
    kdotv = kappa.k[0] * traj.v
    sig = shape_factor(traj, nu * traj.tau)
    phase = cmath.exp(-1j * kappa.k[0] * traj.position(0.0))
    b = 1j * kdotv * phase * sig / nu**2
    return LaunchAmplitude(b_value=b, b_abs2=abs(b) ** 2)


def _lambda_tail(nu: float, t: float, atom: AtomParams,
                 reg: RegularizationParams) -> complex:
    """exp(i nu t)/(i nu) via lambda-damped lower limit, extrapolated to 0.

    The switched-on integral gives e^{(i nu + lam) t}/(i nu + lam); the exact
    lam -> 0 limit is analytic, so the polynomial extrapolation doubles as a
    self-check that the production lambda is converged.
    """
    lams = reg.ladder(atom)
    vals = np.array([cmath.exp((1j * nu + lam) * t) / (1j * nu + lam) for lam in lams])
    coeff_r = np.polyfit(lams, vals.real, len(lams) - 1)
    coeff_i = np.polyfit(lams, vals.imag, len(lams) - 1)
    return complex(coeff_r[-1], coeff_i[-1])


def amplitude_A_oracle(
    kappa: ModeIndex,
    traj: Trajectory,
    atom: AtomParams,
    t: float,
    reg: RegularizationParams | None = None,
    spec: QuadSpec | None = None,
) -> complex:
    """Time-domain one-photon amplitude integral(-inf..t) e^{i(Omega+w)t1 - i k.r(t1)}.

    Direct oscillatory quadrature over the launch window with the at-rest and
    constant-velocity segments integrated in closed form; the lower limit is
    handled by the lambda-damped tail with extrapolation to lambda -> 0.
    """
    reg = reg or RegularizationParams()
    spec = spec or QuadSpec(rel_tol=1e-10, abs_tol=1e-13)
    nu = atom.omega0 + kappa.omega
    kx = kappa.k[0]
    if traj.kind == "constant":
        # uniform motion for all times: the tail carries the full answer
        return _lambda_tail(nu - kx * traj.v, t, atom, reg)

    t_lo, t_hi = traj.launch_window
    if t <= t_lo:
        return _lambda_tail(nu, t, atom, reg)

    total = _lambda_tail(nu, t_lo, atom, reg)
    t_mid = min(t, t_hi)
    if t_mid > t_lo:
        r = integrate_oscillatory(
            lambda s: np.exp(-1j * kx * traj.position(s)), nu, t_lo, t_mid, spec)
        if not r.converged:
            raise QuadratureError(
                f"launch-window amplitude integral not converged (err {r.err_estimate:.2e})",
                result=r)
        total += r.value
    if t > t_hi:
        nud = nu - kx * traj.v  # x(t1) = v t1 on the inertial branch
        total += (cmath.exp(1j * nud * t) - cmath.exp(1j * nud * t_hi)) / (1j * nud)
    return total


def amplitude_A_late(kappa: ModeIndex, traj: Trajectory, atom: AtomParams,
                     t: float) -> complex:
    """Closed-form late-time asymptote: adiabatic term plus boost constant."""
    nu = atom.omega0 + kappa.omega
    nud = nu - kappa.k[0] * traj.v
    b = amplitude_B(kappa, traj, atom).b_value
    return cmath.exp(1j * nud * t) / (1j * nud) + b


def amplitude_M_asymptotic(
    k1: ModeIndex,
    k2: ModeIndex,
    traj: Trajectory,
    atom: AtomParams,
    t: float,
) -> dict[str, complex]:
    """Late-time two-photon amplitude split for the (1,2) photon ordering.

    Returns the adiabatic term, the launch term proportional to B_{e,kappa1},
    and the exchange-symmetrised t-independent constant (small-v form, known
    in closed form for ramp-family launches).  Exactly resonant pairs
    (w1' + w2' = 0) raise ResonantPairError: the squared amplitude then grows
    linearly in t and belongs to the rate-based power operations.
    """
    omega0 = atom.omega0
    w1p = k1.doppler(traj.v)
    w2p = k2.doppler(traj.v)
    if w1p + w2p == 0.0:
        raise ResonantPairError(
            "w1' + w2' = 0: amplitude grows linearly, use the power operations")

    adiabatic = -cmath.exp(1j * (w1p + w2p) * t) / ((omega0 + w1p) * (w1p + w2p))
    b1 = amplitude_B(k1, traj, atom).b_value
    if w2p == omega0:
        raise ResonantPairError("w2' = Omega: launch term resonant, use power operations")
    launch = b1 * cmath.exp(1j * (w2p - omega0) * t) / (1j * (w2p - omega0))

    if traj.kind == "constant":
        const = 0.0 + 0.0j
    elif traj.kind in ("sudden", "ramp"):
        w1, w2 = k1.omega, k2.omega
        kv1 = k1.k[0] * traj.v
        kv2 = k2.k[0] * traj.v
        sinc = float(np.sinc((w1 + w2) * traj.tau / np.pi))
        const = (2.0 * omega0 / (w1 + w2) ** 2) * (
            kv1 / (omega0**2 - w2**2) + kv2 / (omega0**2 - w1**2)) * sinc
    else:
        raise NotImplementedError(
            "closed-form constant term only available for sudden/ramp launches")
    return {"adiabatic_term": adiabatic, "launch_term": launch, "const_term": const}


# ---------------------------------------------------------------------------
# Ground-state rate, shift, and boost excitation probability
# ---------------------------------------------------------------------------

def gamma_ground(atom: AtomParams, m: MaterialParams, v: float,
                 spec: QuadSpec | None = None) -> float:
    """Golden-rule excitation rate of the moving ground-state atom.

    The energy delta is eliminated analytically (w = k.v - Omega on the
    anomalous-Doppler domain k.v >= Omega), leaving a 2-D (angle, radial)
    integral that scales like exp(-2 Omega z / v).  Returns 0 for v = 0.
    """
    if v < 0.0:
        raise ValueError("v must be >= 0")
    if v == 0.0:
        return 0.0
    spec = spec or QuadSpec(rel_tol=1e-7, max_evals=5_000_000)
    omega0, z, alpha = atom.omega0, atom.z, atom.alpha0
    x0 = 2.0 * omega0 * z / v  # leading exponent, factored out for conditioning

    def integrand(X):
        theta = X[:, 0]
        s = X[:, 1]
        c = np.cos(theta)
        out = np.zeros(len(X))
        good = c > 1e-12
        sec = 1.0 / c[good]
        damp = np.exp(-x0 * (sec - 1.0))
        live = damp > 0.0
        idx = np.where(good)[0][live]
        sec = sec[live]
        dk, wk = damped_rational_map(s[idx], 2.0 * z)
        k = omega0 / v * sec + dk  # radial offset from the threshold
        w = v * dk / sec  # = k v cos(theta) - Omega
        out[idx] = damp[live] * wk * k * k * im_reflection(w, m)
        return out

    r = integrate_nd(integrand, [[-np.pi / 2, 0.0, np.pi / 2], [0.0, 1.0]], spec)
    val = r.expect("gamma_ground k-integral")
    return (alpha * omega0 / np.pi) * math.exp(-x0) * val


def lamb_shift_ground(atom: AtomParams, m: MaterialParams, v: float,
                      spec: QuadSpec | None = None) -> float:
    """Ground-state (van der Waals) shift of the moving atom.

    Principal-value part of the mode integral of d^2 2k^2 |phi|^2/(Omega+w');
    the angular integral is done in closed form, which evaluates the principal
    value exactly: PV over the angle gives 2*pi/sqrt((Omega+w)^2 - (kv)^2)
    below the anomalous-Doppler edge and zero above it.  Negative at small v,
    scaling like z^-3.
    """
    if v < 0.0:
        raise ValueError("v must be >= 0")
    spec = spec or QuadSpec(rel_tol=1e-8, max_evals=5_000_000)
    omega0, z, alpha = atom.omega0, atom.z, atom.alpha0
    ws = m.omega_s
    w_split = 20.0 * ws

    def body(X, wfun, jac):
        sk = X[:, 0]
        w = wfun(X[:, 1])
        k, wk = damped_rational_map(sk, 2.0 * z)
        disc = (omega0 + w) ** 2 - (k * v) ** 2
        ang = np.where(disc > 0.0, 2.0 * np.pi / np.sqrt(np.abs(disc) + 1e-300), 0.0)
        return wk * k * k * im_reflection(w, m) * ang * jac(X[:, 1])

    boxes_w = [0.0, max(ws - 5 * m.gamma_damp, ws * 0.5), ws + 5 * m.gamma_damp, w_split]
    r_head = integrate_nd(lambda X: body(X, lambda s: s, lambda s: np.ones_like(s)),
                          [[0.0, 1.0], boxes_w], spec)
    r_tail = integrate_nd(lambda X: body(X, lambda s: w_split / s, lambda s: w_split / s**2),
                          [[0.0, 1.0], [0.0, 1.0]], spec)
    val = r_head.expect("lamb_shift head") + r_tail.expect("lamb_shift tail")
    return -(alpha * omega0 / (2.0 * np.pi**2)) * val


def excitation_probability(atom: AtomParams, m: MaterialParams, traj: Trajectory,
                           spec: QuadSpec | None = None, mode: str = "reduced") -> float:
    """Boost excitation probability p_e (a probability, not a rate).

    mode='reduced' uses the exact in-plane integral 3 pi v^2/(4 z^5) and a
    single frequency quadrature; mode='kappa3d' re-does the full mode-space
    integral as a cross-check (must agree within 0.5%).
    """
    spec = spec or DEFAULT_SPEC
    if traj.kind == "constant" or traj.v == 0.0:
        return 0.0
    omega0, z, alpha = atom.omega0, atom.z, atom.alpha0
    v = traj.v

    if mode == "reduced":
        kfac = 3.0 * np.pi * v * v / (4.0 * z**5)
        p = alpha * omega0 / (2.0 * np.pi**2) * kfac * _pe_omega_integral(atom, m, traj, spec)
    elif mode == "kappa3d":
        p = _pe_kappa3d(atom, m, traj, spec)
    else:
        raise ValueError(f"unknown p_e mode {mode!r}")
    if p > 0.1:
        warnings.warn(f"p_e = {p:.3g} > 0.1: perturbation theory strained", stacklevel=2)
    return p


def _pe_omega_integral(atom, m, traj, spec) -> float:
    omega0 = atom.omega0

    def f(w):
        nu = omega0 + w
        sig2 = np.abs(shape_factor(traj, nu * traj.tau)) ** 2
        return im_reflection(w, m) * sig2 / nu**4

    ws, g = m.omega_s, m.gamma_damp
    pts = [max(ws - 5 * g, 0.5 * ws), ws + 5 * g]
    return integrate_semiinf_algebraic(
        f, 0.0, spec, points=pts, tail_start=20.0 * ws).expect("p_e frequency integral")


def _pe_kappa3d(atom, m, traj, spec) -> float:
    omega0, z, v = atom.omega0, atom.z, traj.v
    ws, g = m.omega_s, m.gamma_damp
    w_split = 20.0 * ws

    def body(X, wfun, jac):
        sk = X[:, 0]
        th = X[:, 1]
        w = wfun(X[:, 2])
        k, wk = damped_rational_map(sk, 2.0 * z)
        nu = omega0 + w
        sig2 = np.abs(shape_factor(traj, nu * traj.tau)) ** 2
        kv2 = (k * v * np.cos(th)) ** 2
        return wk * k**2 * im_reflection(w, m) * kv2 * sig2 / nu**4 * jac(X[:, 2])

    boxes_w = [0.0, max(ws - 5 * g, ws * 0.5), ws + 5 * g, w_split]
    head = integrate_nd(lambda X: body(X, lambda s: s, lambda s: np.ones_like(s)),
                        [[0.0, 1.0], [0.0, 2.0 * np.pi], boxes_w],
                        spec).expect("p_e 3-D head")
    tail = integrate_nd(lambda X: body(X, lambda s: w_split / s, lambda s: w_split / s**2),
                        [[0.0, 1.0], [0.0, 2.0 * np.pi], [0.0, 1.0]],
                        spec).expect("p_e 3-D tail")
    return alpha_scale(atom) * (head + tail)


def alpha_scale(atom: AtomParams) -> float:
    return atom.alpha0 * atom.omega0 / (2.0 * np.pi**2)

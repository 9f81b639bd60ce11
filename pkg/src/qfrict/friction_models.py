"""Friction observables: two-photon powers, one-photon power, and forces.

Three routes to the drag on the moving atom are implemented side by side:

* perturbation theory: the pair-emission power P_A (v^4/z^10), the
  launch-dependent power P_B (v^2/z^8) with its one-photon partner P_1 that
  cancels it at leading order, and the average radiation force;
* the Markov (memory-less) radiation-reaction force, linear in v;
* the non-equilibrium steady-state route built on the dressed dipole
  spectrum, cubic in v.

Every closed-form asymptote is paired with an independent quadrature of the
defining mode integral.  Units: hbar = 1; motion along +x at height z.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .material_response import (
    AtomParams,
    MaterialParams,
    im_reflection,
    im_reflection_slope0,
)
from .perturbation_amplitudes import gamma_ground, lamb_shift_ground
from .quadrature import (
    DEFAULT_SPEC,
    DEFAULT_SPEC_ND,
    QuadSpec,
    damped_rational_map,
    integrate_1d,
    integrate_nd,
    integrate_semiinf_algebraic,
    principal_value,
)
from .trajectory import Trajectory, shape_factor

__all__ = [
    "PowerBreakdown",
    "ForceResult",
    "MarkovLinewidths",
    "NonEqSpectralFunctions",
    "WickIntegral",
    "ResonanceError",
    "ValueWithError",
    "power_pa_asymptotic",
    "power_pa_quadrature",
    "power_pb",
    "power_p1",
    "power_breakdown",
    "force_second_order",
    "force_fourth_order",
    "markov_force",
    "wick_frequency_integral",
    "noneq_spectral",
    "noneq_force",
    "dipole_spectrum",
    "k_integral_pa",
    "k_integral_pb",
]


class ResonanceError(ArithmeticError):
    """Closed form requested inside the resonant window where it is invalid."""


@dataclass(frozen=True)
class ValueWithError:
    """Scalar observable with its quadrature error budget.

    ``converged`` mirrors the underlying QuadResult flags: a False value is
    still usable (err still bounds the residual) but signals that the
    requested tolerance was not certified within the evaluation budget.
    """

    value: float
    err: float = 0.0
    converged: bool = True
    evals: int = 0

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class PowerBreakdown:
    """Per-channel powers; ``total`` is the sum of the three by construction."""

    p_a: float
    p_b: float
    p_one: float
    err: dict = field(default_factory=dict)
    mode: str = "Quadrature"

    @property
    def total(self) -> float:
        return self.p_a + self.p_b + self.p_one


@dataclass(frozen=True)
class ForceResult:
    """In-plane force (fx, fy); fy vanishes by mirror symmetry about the x-axis."""

    f: tuple[float, float]
    model: str
    velocity_exponent_hint: float
    err: float = 0.0
    breakdown: dict = field(default_factory=dict)
    converged: bool = True

    def dot_v(self, v: float) -> float:
        return self.f[0] * v


@dataclass(frozen=True)
class MarkovLinewidths:
    """Golden-rule linewidths near the surface: gamma_eta = q_eta * gamma."""

    gamma_perp: float
    q_tensor: tuple[float, float, float] = (0.5, 0.5, 1.0)

    @classmethod
    def for_atom(cls, atom: AtomParams, m: MaterialParams) -> "MarkovLinewidths":
        g = atom.alpha0 * atom.omega0 * im_reflection(atom.omega0, m) / (4.0 * atom.z**3)
        return cls(gamma_perp=g)

    def gamma_eta(self, axis: int) -> float:
        return self.q_tensor[axis] * self.gamma_perp

    def weighted_sum_coeff(self) -> float:
        """sum_eta |eta.k~|^2 gamma_eta = coeff * gamma * k^2; equals 3/2."""
        return self.q_tensor[0] * 0.5 + self.q_tensor[1] * 0.5 + self.q_tensor[2]


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _omega_breakpoints(m: MaterialParams) -> list[float]:
    lo = max(m.omega_s - 5.0 * m.gamma_damp, 0.5 * m.omega_s)
    return [lo, m.omega_s + 5.0 * m.gamma_damp]


def _omega_boxes(m: MaterialParams) -> list[float]:
    return [0.0] + _omega_breakpoints(m) + [20.0 * m.omega_s]


def _omega_quad(f, m: MaterialParams, spec: QuadSpec, name: str) -> ValueWithError:
    r = integrate_semiinf_algebraic(f, 0.0, spec, points=_omega_breakpoints(m),
                                    tail_start=20.0 * m.omega_s)
    return ValueWithError(r.expect(name), r.err_estimate, r.converged, r.evals)


def _s_cut(atom: AtomParams, v: float) -> float:
    """Upper bound of the rational k-map that excludes the resonance shell.

    The one-photon pole sits at k ~ Omega/v; capping k at half that keeps the
    Doppler denominators bounded while the truncation error stays at the
    e^{-2 k_cut z} <= e^{-Omega z / v} level of the neglected exponentially
    small channels (and never below e^{-80} for slow atoms).
    """
    k_cut = 40.0 / atom.z
    if v > 0.0:
        k_cut = min(k_cut, 0.5 * atom.omega0 / v)
    k_cut = max(k_cut, 8.0 / atom.z)
    x = 2.0 * atom.z * k_cut
    return x / (1.0 + x)


# ---------------------------------------------------------------------------
# P_A: pair emission for uniform motion
# ---------------------------------------------------------------------------

def power_pa_asymptotic(atom: AtomParams, m: MaterialParams, v: float) -> float:
    """Small-velocity closed form P_A = (9/512 pi) v^4 alpha^2 wp^4 Gamma^2/(wS^8 z^10)."""
    if v < 0:
        raise ValueError("v must be >= 0")
    if v > 0.1 * atom.omega0 * atom.z:
        warnings.warn("v/(Omega z) > 0.1: asymptotic P_A outside its regime", stacklevel=2)
    return (9.0 / (512.0 * np.pi)) * v**4 * atom.alpha0**2 * m.omega_p**4 \
        * m.gamma_damp**2 / (m.omega_s**8 * atom.z**10)


def power_pa_quadrature(atom: AtomParams, m: MaterialParams, v: float,
                        spec: QuadSpec | None = None,
                        mode: str = "full") -> ValueWithError:
    """P_A from the mode-space integral with the pair delta eliminated.

    mode='full' keeps the exact Im R and the Doppler-shifted denominators
    (5-D adaptive quadrature over both wavevectors and the pair-energy
    fraction; the delta fixed w1 + w2 = (k1+k2).v >= 0).  mode='scaling'
    evaluates the 4-D small-velocity reduction with Im R replaced by its
    Ohmic slope, whose wavevector integral is the 27 pi^2/(16 z^10) constant.
    """
    if v < 0:
        raise ValueError("v must be >= 0")
    if v == 0.0:
        return ValueWithError(0.0, 0.0)
    spec = spec or DEFAULT_SPEC_ND
    z, omega0, alpha = atom.z, atom.omega0, atom.alpha0
    twopi = 2.0 * np.pi

    if mode == "scaling":
        rp = im_reflection_slope0(m)
        pref = alpha**2 * rp**2 / (48.0 * np.pi**3)

        def f(X):
            k1, wk1 = damped_rational_map(X[:, 0], 2.0 * z)
            k2, wk2 = damped_rational_map(X[:, 2], 2.0 * z)
            th1, th2 = X[:, 1], X[:, 3]
            kk = v * (k1 * np.cos(th1) + k2 * np.cos(th2))
            return wk1 * wk2 * k1**2 * k2**2 * (1.0 - np.cos(th1 - th2)) ** 2 * kk**4

        r = integrate_nd(f, [[0, 1], [0, twopi], [0, 1], [0, twopi]], spec)
        return ValueWithError(pref * r.value, pref * r.err_estimate,
                              r.converged, r.evals)

    if mode != "full":
        raise ValueError(f"unknown P_A mode {mode!r}")

    pref = alpha**2 * omega0**4 / (4.0 * np.pi**3)
    s0 = _s_cut(atom, v)

    # Angles recast as (u = th1 - th2, psi): the pair energy becomes
    # K = v * rho(u, k1, k2) * cos(psi), so the anomalous-Doppler boundary
    # K = 0 sits exactly on the box faces psi = +-pi/2 and the integrand is
    # analytic inside (a K > 0 indicator in raw angles kinks every box).
    def f(X):
        k1, wk1 = damped_rational_map(X[:, 0], 2.0 * z)
        k2, wk2 = damped_rational_map(X[:, 1], 2.0 * z)
        u, psi, x = X[:, 2], X[:, 3], X[:, 4]
        rho = np.sqrt(k1**2 + k2**2 + 2.0 * k1 * k2 * np.cos(u))
        phi = np.arctan2(k1 * np.sin(u), k1 * np.cos(u) + k2)
        kk = v * rho * np.cos(psi)
        kv1 = v * k1 * np.cos(psi + u - phi)
        kv2 = v * k2 * np.cos(psi - phi)
        w1 = kk * x
        w2 = kk * (1.0 - x)
        den = (omega0 + w1 - kv1) ** 2 * (omega0 + w2 - kv2) ** 2
        return wk1 * wk2 * k1**2 * k2**2 * (1.0 - np.cos(u)) ** 2 * kk**2 \
            * im_reflection(w1, m) * im_reflection(w2, m) / den

    r = integrate_nd(
        f, [[0, s0], [0, s0], [0, twopi], [-np.pi / 2, np.pi / 2], [0, 1]], spec)
    return ValueWithError(pref * r.value, pref * r.err_estimate, r.converged, r.evals)


def k_integral_pa(z: float, v: float, spec: QuadSpec | None = None) -> ValueWithError:
    """Quadrature of the anomalous-Doppler-restricted P_A wavevector integral.

    Target constant: 27 pi^2 v^4 / (16 z^10).  The restriction to
    (k1+k2).v >= 0 equals half the unrestricted integral by symmetry.
    """
    spec = spec or QuadSpec(rel_tol=1e-7, max_evals=DEFAULT_SPEC_ND.max_evals)
    twopi = 2.0 * np.pi

    def f(X):
        k1, wk1 = damped_rational_map(X[:, 0], 2.0 * z)
        k2, wk2 = damped_rational_map(X[:, 2], 2.0 * z)
        th1, th2 = X[:, 1], X[:, 3]
        kk = v * (k1 * np.cos(th1) + k2 * np.cos(th2))
        return wk1 * wk2 * k1**2 * k2**2 * (1.0 - np.cos(th1 - th2)) ** 2 * kk**4

    r = integrate_nd(f, [[0, 1], [0, twopi], [0, 1], [0, twopi]], spec)
    return ValueWithError(0.5 * r.value, 0.5 * r.err_estimate, r.converged, r.evals)


def k_integral_pb(z: float, v: float, spec: QuadSpec | None = None) -> ValueWithError:
    """Quadrature of the P_B wavevector integral; target 9 pi^2 v^2 / (16 z^8)."""
    spec = spec or QuadSpec(rel_tol=1e-7, max_evals=DEFAULT_SPEC_ND.max_evals)
    twopi = 2.0 * np.pi

    def f(X):
        k1, wk1 = damped_rational_map(X[:, 0], 2.0 * z)
        k2, wk2 = damped_rational_map(X[:, 2], 2.0 * z)
        th1, th2 = X[:, 1], X[:, 3]
        return wk1 * wk2 * k1**2 * k2**2 * (1.0 - np.cos(th1 - th2)) ** 2 \
            * (v * k1 * np.cos(th1)) ** 2

    r = integrate_nd(f, [[0, 1], [0, twopi], [0, 1], [0, twopi]], spec)
    return ValueWithError(r.value, r.err_estimate, r.converged, r.evals)


# ---------------------------------------------------------------------------
# P_B and P_1: launch-dependent channels
# ---------------------------------------------------------------------------

def _boost_freq_integral(atom, m, traj, spec, power: int = 3) -> ValueWithError:
    """integral dw Im R(w) |Sigma((Omega+w)tau)|^2 / (Omega+w)^power."""
    omega0 = atom.omega0

    def f(w):
        nu = omega0 + w
        sig2 = np.abs(shape_factor(traj, nu * traj.tau)) ** 2
        return im_reflection(w, m) * sig2 / nu**power

    return _omega_quad(f, m, spec, "boost frequency integral")


def power_pb(atom: AtomParams, m: MaterialParams, v: float, traj: Trajectory,
             spec: QuadSpec | None = None, mode: str = "leading") -> ValueWithError:
    """Launch-dependent two-photon power P_B >= 0.

    mode='leading' drops the Doppler shifts (the default, matching the
    small-velocity bookkeeping): the wavevector integrals are then exact
    (3 pi^2 angular weight, radial moments 3/(4 z^5) and 1/(4 z^3)) and a
    single frequency quadrature remains.  mode='full' keeps the shifted
    resonance (5-D quadrature).  mode='sudden-closed' is the sudden-boost
    narrow-resonance closed form built on the two-term Wick integral.
    """
    if traj.kind == "constant" or v == 0.0:
        return ValueWithError(0.0, 0.0)
    alpha, omega0, z = atom.alpha0, atom.omega0, atom.z

    if mode == "leading":
        spec = spec or DEFAULT_SPEC
        j = _boost_freq_integral(atom, m, traj, spec, power=3)
        pref = 9.0 / (128.0 * np.pi) * alpha**2 * omega0**2 * v**2 \
            * im_reflection(omega0, m) / z**8
        return ValueWithError(pref * j.value, pref * j.err, j.converged, j.evals)

    if mode == "sudden-closed":
        w = wick_frequency_integral(atom, m, spec or DEFAULT_SPEC)
        gam = MarkovLinewidths.for_atom(atom, m).gamma_perp
        pref = 9.0 / (32.0 * np.pi) * alpha * omega0 * gam * v**2 / z**5
        return ValueWithError(pref * w.two_term, 0.0)

    if mode != "full":
        raise ValueError(f"unknown P_B mode {mode!r}")

    spec = spec or DEFAULT_SPEC_ND
    pref = alpha**2 * omega0**2 / (8.0 * np.pi**3)
    twopi = 2.0 * np.pi
    tau = traj.tau

    def body(X, wfun, jac):
        s1, th1, s, s2, th2 = X.T
        k1, wk1 = damped_rational_map(s1, 2.0 * z)
        k2, wk2 = damped_rational_map(s2, 2.0 * z)
        w1 = wfun(s)
        w2 = omega0 + v * k2 * np.cos(th2)
        nu1 = omega0 + w1
        sig2 = np.abs(shape_factor(traj, nu1 * tau)) ** 2
        val = wk1 * wk2 * k1**2 * k2**2 * (1.0 - np.cos(th1 - th2)) ** 2 \
            * (w1 + w2) * im_reflection(w1, m) * np.where(w2 > 0, im_reflection(w2, m), 0.0) \
            * (v * k1 * np.cos(th1)) ** 2 * sig2 / nu1**4
        return val * jac(s)

    w_hi = 20.0 * m.omega_s
    head = integrate_nd(
        lambda X: body(X, lambda s: s, lambda s: np.ones_like(s)),
        [[0, 1], [0, twopi], _omega_boxes(m), [0, 1], [0, twopi]], spec)
    tail = integrate_nd(
        lambda X: body(X, lambda s: w_hi / s, lambda s: w_hi / s**2),
        [[0, 1], [0, twopi], [0, 1], [0, 1], [0, twopi]], spec)
    val = head.value + tail.value
    return ValueWithError(pref * val, pref * (head.err_estimate + tail.err_estimate),
                          head.converged and tail.converged, head.evals + tail.evals)


def power_p1(atom: AtomParams, m: MaterialParams, v: float, traj: Trajectory,
             spec: QuadSpec | None = None, mode: str = "leading") -> ValueWithError:
    """One-photon power P_1 <= 0: drain of the launch-excited population.

    The intermediate-photon delta pins its frequency at Omega (leading mode)
    or at the Doppler-shifted resonance (full mode).  At leading order P_1
    balances P_B exactly.
    """
    if traj.kind == "constant" or v == 0.0:
        return ValueWithError(0.0, 0.0)
    alpha, omega0, z = atom.alpha0, atom.omega0, atom.z

    if mode == "leading":
        spec = spec or DEFAULT_SPEC
        # excited-state energy weight (Omega+w) against the boost amplitude's
        # 1/(Omega+w)^4; decay-photon integrals are exact moments
        j = _boost_freq_integral(atom, m, traj, spec, power=3)
        radial = (3.0 / (4.0 * z**5)) * (1.0 / (4.0 * z**3)) * 3.0 * np.pi**2
        pref = alpha**2 * omega0**2 / (8.0 * np.pi**3) * radial * v**2 \
            * im_reflection(omega0, m)
        return ValueWithError(-pref * j.value, pref * j.err, j.converged, j.evals)

    if mode != "full":
        raise ValueError(f"unknown P_1 mode {mode!r}")

    spec = spec or DEFAULT_SPEC_ND
    pref = alpha**2 * omega0**2 / (8.0 * np.pi**3)
    twopi = 2.0 * np.pi
    tau = traj.tau

    def body(X, wfun, jac):
        sk, th, s, sk1, th1 = X.T
        k, wk = damped_rational_map(sk, 2.0 * z)
        k1, wk1 = damped_rational_map(sk1, 2.0 * z)
        w = wfun(s)
        w1 = omega0 + v * k1 * np.cos(th1)
        nu = omega0 + w
        sig2 = np.abs(shape_factor(traj, nu * tau)) ** 2
        val = wk * wk1 * k**2 * k1**2 * (1.0 - np.cos(th - th1)) ** 2 \
            * nu * im_reflection(w, m) * np.where(w1 > 0, im_reflection(w1, m), 0.0) \
            * (v * k * np.cos(th)) ** 2 * sig2 / nu**4
        return val * jac(s)

    w_hi = 20.0 * m.omega_s
    head = integrate_nd(
        lambda X: body(X, lambda s: s, lambda s: np.ones_like(s)),
        [[0, 1], [0, twopi], _omega_boxes(m), [0, 1], [0, twopi]], spec)
    tail = integrate_nd(
        lambda X: body(X, lambda s: w_hi / s, lambda s: w_hi / s**2),
        [[0, 1], [0, twopi], [0, 1], [0, 1], [0, twopi]], spec)
    val = head.value + tail.value
    return ValueWithError(-pref * val, pref * (head.err_estimate + tail.err_estimate),
                          head.converged and tail.converged, head.evals + tail.evals)


def power_breakdown(atom: AtomParams, m: MaterialParams, traj: Trajectory,
                    spec: QuadSpec | None = None, mode: str = "leading",
                    pa_mode: str = "full",
                    pa_spec: QuadSpec | None = None) -> PowerBreakdown:
    """Assemble P_A, P_B and P_1 for one trajectory into a PowerBreakdown."""
    v = traj.v
    pa = power_pa_quadrature(atom, m, v, pa_spec, mode=pa_mode)
    pb = power_pb(atom, m, v, traj, spec, mode=mode)
    p1 = power_p1(atom, m, v, traj, spec, mode=mode)
    return PowerBreakdown(p_a=pa.value, p_b=pb.value, p_one=p1.value,
                          err={"p_a": pa.err, "p_b": pb.err, "p_one": p1.err},
                          mode="Quadrature")


# ---------------------------------------------------------------------------
# Average radiation force (perturbative route)
# ---------------------------------------------------------------------------

def force_second_order(atom: AtomParams, m: MaterialParams, v: float,
                       spec: QuadSpec | None = None) -> ForceResult:
    """Photon-recoil force on the uniformly moving atom (second order).

    Lives entirely on the anomalous-Doppler domain k.v >= Omega, hence is
    exponentially small ~ exp(-2 Omega z / v); antiparallel to v.
    """
    if v < 0:
        raise ValueError("v must be >= 0")
    if v == 0.0:
        return ForceResult((0.0, 0.0), "PerturbativeO4", 0.0)
    spec = spec or QuadSpec(rel_tol=1e-7, max_evals=5_000_000)
    omega0, z, alpha = atom.omega0, atom.z, atom.alpha0
    x0 = 2.0 * omega0 * z / v

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
        k = omega0 / v * sec + dk
        w = v * dk / sec
        out[idx] = damp[live] * wk * k**3 / sec * im_reflection(w, m)
        return out

    r = integrate_nd(integrand, [[-np.pi / 2, 0.0, np.pi / 2], [0.0, 1.0]], spec)
    val = r.expect("second-order recoil integral")
    pref = (alpha * omega0 / np.pi) * math.exp(-x0)
    return ForceResult((-pref * val, 0.0), "PerturbativeO4", 0.0,
                       err=pref * r.err_estimate, converged=r.converged)


def force_fourth_order(atom: AtomParams, m: MaterialParams, v: float, t: float,
                       spec: QuadSpec | None = None,
                       pa_mode: str = "full") -> ForceResult:
    """Average radiation force at fourth order for uniform motion.

    Dominant term -(v_hat/v) P_A plus the exponentially small pieces (the
    ground-state depletion acting on the recoil force at elapsed time t, and
    the velocity gradient of gamma_g * deltaE_g), reported in the breakdown.
    """
    if v <= 0.0:
        raise ValueError("fourth-order force needs v > 0")
    pa = power_pa_quadrature(atom, m, v, spec, mode=pa_mode)
    dominant = -pa.value / v

    gg = gamma_ground(atom, m, v)
    f2 = force_second_order(atom, m, v)
    depletion = -gg * t * f2.f[0]

    h = 0.01 * v

    def g(vv):
        return gamma_ground(atom, m, vv) * lamb_shift_ground(atom, m, vv)

    grad = -(g(v + h) - g(v - h)) / (2.0 * h)

    fx = dominant + depletion + grad
    return ForceResult((fx, 0.0), "PerturbativeO4", 3.0, err=pa.err / v,
                       breakdown={"dominant": dominant,
                                  "ground_depletion": depletion,
                                  "grad_v_gamma_shift": grad,
                                  "p_a": pa.value},
                       converged=pa.converged)


# ---------------------------------------------------------------------------
# Markov macroscopic-QED force
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WickIntegral:
    """integral_0^inf dw Im R(w)/(Omega+w)^3 and its two-term approximation."""

    value: float
    err: float
    first_term: float
    second_term: float

    @property
    def two_term(self) -> float:
        return self.first_term + self.second_term


def wick_frequency_integral(atom: AtomParams, m: MaterialParams,
                            spec: QuadSpec | None = None) -> WickIntegral:
    spec = spec or DEFAULT_SPEC
    omega0 = atom.omega0

    def f(w):
        return im_reflection(w, m) / (omega0 + w) ** 3

    r = _omega_quad(f, m, spec, "Wick frequency integral")
    first = np.pi * m.omega_p**2 / (4.0 * m.omega_s * (omega0 + m.omega_s) ** 3)
    second = m.omega_p**2 * m.gamma_damp / (4.0 * omega0 * m.omega_s**4)
    return WickIntegral(value=r.value, err=r.err, first_term=first, second_term=second)


def markov_force(atom: AtomParams, m: MaterialParams, v: float,
                 mode: str = "FullIntegral",
                 spec: QuadSpec | None = None) -> ForceResult:
    """Radiation-reaction force in the Markov approximation; linear in v.

    FullIntegral keeps the Lorentzian-broadened resonance denominator with the
    anisotropic linewidths (3-D quadrature); SmallV linearises in v using the
    3/2 gamma k^2 weighted-linewidth identity and the Wick integral;
    ClosedForm is the narrow-resonance arithmetic expression (invalid within
    3 Gamma of the plasmon resonance).
    """
    if v < 0:
        raise ValueError("v must be >= 0")
    omega0, z, alpha = atom.omega0, atom.z, atom.alpha0
    lw = MarkovLinewidths.for_atom(atom, m)
    gam = lw.gamma_perp

    if mode == "ClosedForm":
        if abs(omega0 - m.omega_s) < 3.0 * m.gamma_damp:
            raise ResonanceError(
                "closed-form Markov force invalid within 3*Gamma of the plasmon resonance")
        fx = -v * 9.0 * alpha**2 * omega0**3 / (512.0 * z**8) \
            * m.omega_p**4 * m.gamma_damp \
            / (m.omega_s * (omega0 + m.omega_s) ** 3 * (omega0**2 - m.omega_s**2) ** 2)
        return ForceResult((fx, 0.0), "MarkovQED", 1.0)

    if mode == "SmallV":
        w = wick_frequency_integral(atom, m, spec)
        pref = 9.0 * alpha * omega0 * gam / (16.0 * np.pi * z**5)
        return ForceResult((-pref * v * w.value, 0.0), "MarkovQED", 1.0,
                           err=pref * v * w.err)

    if mode != "FullIntegral":
        raise ValueError(f"unknown Markov mode {mode!r}")
    if v == 0.0:
        # integrand odd in kx: the lateral force vanishes exactly at rest
        return ForceResult((0.0, 0.0), "MarkovQED", 1.0)

    spec = spec or QuadSpec(rel_tol=1e-6, max_evals=DEFAULT_SPEC_ND.max_evals)
    gxy = lw.gamma_eta(0)
    gz = lw.gamma_eta(2)
    s0 = _s_cut(atom, v)

    def lorsum(dop):
        return gxy / (dop**2 + gxy**2 / 4.0) + gz / (dop**2 + gz**2 / 4.0)

    def body(X, wfun, jac):
        # theta folded onto (-pi/2, pi/2): the theta+pi image flips the sign
        # of cos(theta), so only the odd-in-v part of the Lorentzian survives
        sk, th, s = X.T
        k, wk = damped_rational_map(sk, 2.0 * z)
        w = wfun(s)
        kvc = k * v * np.cos(th)
        lor = lorsum(omega0 + w - kvc) - lorsum(omega0 + w + kvc)
        return np.cos(th) * wk * k**3 * im_reflection(w, m) * lor * jac(s)

    w_hi = 20.0 * m.omega_s
    head = integrate_nd(lambda X: body(X, lambda s: s, lambda s: np.ones_like(s)),
                        [[0, s0], [-np.pi / 2, np.pi / 2], _omega_boxes(m)], spec)
    tail = integrate_nd(lambda X: body(X, lambda s: w_hi / s, lambda s: w_hi / s**2),
                        [[0, s0], [-np.pi / 2, np.pi / 2], [0, 1]], spec)
    val = head.value + tail.value
    pref = alpha * omega0 / (4.0 * np.pi**2)
    return ForceResult((-pref * val, 0.0), "MarkovQED", 1.0,
                       err=pref * (head.err_estimate + tail.err_estimate),
                       converged=head.converged and tail.converged)


# ---------------------------------------------------------------------------
# Non-equilibrium steady state: spectral functions and force
# ---------------------------------------------------------------------------

_AXIS_C = np.array([1.0, 1.0, 2.0])  # k-moment weights per dipole axis (x, y, z)


class NonEqSpectralFunctions:
    """Second-order NESS spectral machinery for one (atom, material, v).

    Exposes the memory-kernel spectrum mu (per dipole axis x, y, z), the
    squared-frequency shift Delta, the damping gamma = mu/2, the dressed
    polarizability, and Im alpha~ of the surface-dressed polarizability.
    The normalisation is anchored to the golden-rule linewidths
    (gamma_z(Omega; 0) = alpha Omega Im R(Omega) / 4 z^3), which makes the
    rest-frame dipole spectrum satisfy S_ii(w;0) = 2 theta(w) Im alpha~_ii(w).
    mu and Delta are even in w, Im alpha~ is odd.  Caches are immutable once
    filled; instances are cheap at v = 0 (mu is then analytic).
    """

    #: degree of the per-segment Chebyshev fit of mu(w'; v) for v > 0
    _interp_deg = 24

    def __init__(self, atom: AtomParams, m: MaterialParams, v: float = 0.0,
                 spec: QuadSpec | None = None):
        # signed v is accepted here so evenness in v can be checked directly
        self.atom = atom
        self.material = m
        self.v = float(v)
        self.spec = spec or QuadSpec(rel_tol=1e-9, max_evals=5_000_000)
        self._mu_interp: list | None = None
        self._delta_cache: dict[float, np.ndarray] = {}
        self._w_tail = 20.0 * m.omega_s

    # -- memory kernel ------------------------------------------------------
    def _mu_tail_analytic(self, w):
        """Beyond 20 wS the Doppler smearing ~ kv/w' is negligible."""
        d2 = self.atom.dipole_sq
        return np.multiply.outer(np.abs(im_reflection(np.abs(w), self.material)),
                                 _AXIS_C / 2.0) * d2 / self.atom.z**3

    def mu_axis(self, omega, axis: int) -> np.ndarray:
        """mu along one dipole axis, vectorised over omega; even in omega."""
        w = np.abs(np.atleast_1d(np.asarray(omega, dtype=float)))
        out = np.empty_like(w)
        far = w >= self._w_tail
        out[far] = self._mu_tail_analytic(w[far])[:, axis]
        near = ~far
        if np.any(near):
            if self.v == 0.0:
                out[near] = self._mu_tail_analytic(w[near])[:, axis]
            else:
                self._ensure_interp()
                out[near] = self._interp_eval(w[near], axis)
        return out if np.ndim(omega) else float(out[0])

    def mu(self, omega: float) -> np.ndarray:
        """Damping-kernel spectrum (x, y, z components) at one frequency."""
        return np.array([self.mu_axis(float(omega), ax) for ax in range(3)])

    def mu_quadrature(self, omega: float, axis: int) -> float:
        """Direct 2-D wavevector quadrature of mu (the interpolation oracle)."""
        atom, m, v = self.atom, self.material, self.v
        z = atom.z
        w = float(omega)
        if v == 0.0:
            return float(self._mu_tail_analytic(np.array([w]))[0, axis])

        def f(X):
            sk, th = X.T
            k, wk = damped_rational_map(sk, 2.0 * z)
            arg = w + k * v * np.cos(th)
            weight = {0: np.cos(th) ** 2, 1: np.sin(th) ** 2,
                      2: np.ones_like(th)}[axis]
            return np.sign(arg) * weight * wk * k**2 * im_reflection(arg, m)

        r = integrate_nd(f, [[0, 1], [0, 2 * np.pi]], self.spec)
        return 2.0 * atom.dipole_sq / np.pi * r.expect(f"mu axis {axis}")

    def _ensure_interp(self):
        if self._mu_interp is not None:
            return
        segs = []
        edges = [0.0] + _omega_breakpoints(self.material) + [self._w_tail]
        for lo, hi in zip(edges[:-1], edges[1:]):
            fits = []
            for ax in range(3):
                fits.append(np.polynomial.chebyshev.Chebyshev.interpolate(
                    lambda x, ax=ax: np.array(
                        [self.mu_quadrature(xi, ax) for xi in np.atleast_1d(x)]),
                    self._interp_deg, domain=[lo, hi]))
            segs.append((lo, hi, fits))
        self._mu_interp = segs

    def _interp_eval(self, w, axis):
        out = np.empty_like(w)
        for lo, hi, fits in self._mu_interp:
            sel = (w >= lo) & (w <= hi) if hi == self._w_tail else (w >= lo) & (w < hi)
            if np.any(sel):
                out[sel] = fits[axis](w[sel])
        return out

    # -- shift and damping ---------------------------------------------------
    def delta_shift(self, omega: float) -> np.ndarray:
        """Fractional squared-frequency shift Delta(w; v); even in w."""
        key = abs(float(omega))
        if key not in self._delta_cache:
            self._delta_cache[key] = self._delta_compute(key)
        return self._delta_cache[key]

    def _delta_compute(self, w: float) -> np.ndarray:
        omega0 = self.atom.omega0
        if w == 0.0:
            return np.zeros(3)
        w_hi = self._w_tail
        # Delta is a small correction to the resonance denominator; 1e-6
        # relative is ample (it cancels identically in the rest-frame
        # fluctuation-dissipation comparison) and stays within what the
        # excision extrapolation can certify on top of the plasmon peak
        pv_spec = QuadSpec(rel_tol=max(10.0 * self.spec.rel_tol, 1e-6),
                           max_evals=self.spec.max_evals)
        out = np.empty(3)
        for ax in range(3):
            def f(wp, ax=ax):
                wp = np.atleast_1d(np.asarray(wp, dtype=float))
                return self.mu_axis(wp, ax) / (wp**2 - w**2)

            def tail(s, ax=ax):
                s = np.asarray(s)
                return f(w_hi / s) * w_hi / s**2

            if w < w_hi:
                pv = principal_value(
                    f, w, 0.0, w_hi, pv_spec,
                    eps0=0.5 * self.material.gamma_damp,
                    points=_omega_breakpoints(self.material)).expect(
                    f"Delta principal value axis {ax}")
                pv += integrate_1d(tail, 0.0, 1.0, self.spec).expect("Delta tail")
            else:
                pv = integrate_1d(f, 0.0, w_hi, self.spec,
                                  points=_omega_breakpoints(self.material)).expect(
                    "Delta head")
                pv += principal_value(tail, w_hi / w, 0.0, 1.0, pv_spec).expect(
                    "Delta tail principal value")
            out[ax] = -(w**2 / (np.pi * omega0**2)) * pv
        return out

    def gamma_damp_atom(self, omega: float) -> np.ndarray:
        """Frequency-resolved atomic damping gamma(w; v) = mu(w; v)/2."""
        return 0.5 * self.mu(omega)

    # -- polarizabilities ----------------------------------------------------
    def alpha_dressed(self, omega: float) -> np.ndarray:
        """Diagonal dressed polarizability alpha_i(w; v) (complex 3-vector)."""
        atom = self.atom
        omega0 = atom.omega0
        w = float(omega)
        delta = self.delta_shift(w)
        gam = self.gamma_damp_atom(w)
        den = omega0**2 * (1.0 - delta) - w * w - 1j * w * gam
        return atom.alpha0 * omega0**2 / den

    def alpha_dressed_im(self, omega: float) -> np.ndarray:
        """Im alpha~_ii(w): surface-dressed absorption spectrum; odd in w.

        The in-plane dressing integral is analytic: the axis moments of
        e^{-2kz} give c_i/(8 z^3) with c = (1, 1, 2).
        """
        w = float(omega)
        a = self.alpha_dressed(abs(w))
        val = _AXIS_C / (8.0 * self.atom.z**3) * im_reflection(abs(w), self.material) \
            * np.abs(a) ** 2
        return val if w >= 0 else -val

    def alpha_dressed_im_trace(self, omega: float) -> float:
        return float(np.sum(self.alpha_dressed_im(omega)))

    def alpha_dressed_im_slope0(self, step_frac: float = 1e-4) -> float:
        """d/dw of the trace of Im alpha~ at w = 0 (Richardson-refined FD)."""
        h = step_frac * self.atom.omega0

        def d(hh):
            return (self.alpha_dressed_im_trace(hh)
                    - self.alpha_dressed_im_trace(-hh)) / (2.0 * hh)

        d1 = d(h)
        d2 = d(0.5 * h)
        return (4.0 * d2 - d1) / 3.0


def noneq_spectral(atom: AtomParams, m: MaterialParams, v: float,
                   spec: QuadSpec | None = None) -> NonEqSpectralFunctions:
    """Build the NESS spectral-function bundle for one parameter point."""
    return NonEqSpectralFunctions(atom, m, v, spec)


def dipole_spectrum(atom: AtomParams, m: MaterialParams, v: float, omega: float,
                    nes: NonEqSpectralFunctions | None = None,
                    spec: QuadSpec | None = None) -> np.ndarray:
    """Stationary dipole power spectrum S_ij(w; v) as a 3x3 real matrix.

    Diagonal in the transition basis (cross-transition coherences cancel in
    the symmetrised correlator); real, symmetric, even in v.  At rest it
    satisfies the fluctuation-dissipation form S_ii(w;0) = 2 theta(w)
    Im alpha~_ii(w).
    """
    spec = spec or QuadSpec(rel_tol=1e-9, max_evals=5_000_000)
    nes = nes or NonEqSpectralFunctions(atom, m, v, spec)
    z = atom.z
    w = float(omega)
    a2 = np.abs(nes.alpha_dressed(abs(w))) ** 2

    out = np.zeros((3, 3))
    for ax in range(3):
        def f(X, ax=ax):
            sk, th = X.T
            k, wk = damped_rational_map(sk, 2.0 * z)
            arg = w + k * v * np.cos(th)
            weight = {0: np.cos(th) ** 2, 1: np.sin(th) ** 2,
                      2: np.ones_like(th)}[ax]
            return np.where(arg > 0.0, im_reflection(arg, m), 0.0) * weight * wk * k**2

        r = integrate_nd(f, [[0, 1], [0, 2 * np.pi]], spec)
        out[ax, ax] = a2[ax] / np.pi * r.expect(f"dipole spectrum axis {ax}")
    return out


def noneq_force(atom: AtomParams, m: MaterialParams, v: float,
                mode: str = "FullIntegral",
                spec: QuadSpec | None = None,
                nes: NonEqSpectralFunctions | None = None) -> ForceResult:
    """Non-equilibrium fluctuation-electrodynamics force; cubic in v.

    FullIntegral restricts the emission frequency to the anomalous-Doppler
    window 0 < w < k.v and convolves Im R with the dressed absorption
    Im alpha~ evaluated at rest; SmallV is the double-Ohmic-slope closed form
    F = -(45 v v^2 / 64 pi z^7) Im alpha~'(0) Im R'(0).
    """
    if v < 0:
        raise ValueError("v must be >= 0")
    if v == 0.0:
        return ForceResult((0.0, 0.0), "NonEqFDT", 3.0)
    nes = nes or NonEqSpectralFunctions(atom, m, 0.0)
    z = atom.z

    if mode == "SmallV":
        slope = nes.alpha_dressed_im_slope0()
        fx = -45.0 * v**3 / (64.0 * np.pi * z**7) * slope * im_reflection_slope0(m)
        return ForceResult((fx, 0.0), "NonEqFDT", 3.0)

    if mode != "FullIntegral":
        raise ValueError(f"unknown non-equilibrium mode {mode!r}")
    spec = spec or QuadSpec(rel_tol=1e-7, max_evals=DEFAULT_SPEC_ND.max_evals)

    # Im alpha~_tr(nu) = Im R(nu) * G(nu): interpolate the smooth dressing
    # factor G over the reachable anomalous-Doppler band nu <= k_cut * v.
    k_cut = 40.0 / z
    s0 = 2.0 * z * k_cut / (1.0 + 2.0 * z * k_cut)
    nu_max = k_cut * v

    def g_scalar(nu):
        a2 = np.abs(nes.alpha_dressed(float(nu))) ** 2
        return float(np.sum(_AXIS_C * a2)) / (8.0 * z**3)

    cheb = np.polynomial.chebyshev.Chebyshev.interpolate(
        lambda nu: np.array([g_scalar(x) for x in np.atleast_1d(nu)]), 8,
        domain=[0.0, nu_max])

    def f(X):
        # only the half-plane k.v > 0 contributes (theta function)
        sk, th, x = X.T
        k, wk = damped_rational_map(sk, 2.0 * z)
        kk = k * v * np.cos(th)
        live = kk > 0.0
        kk = np.where(live, kk, 0.0)
        w = kk * x
        nu = kk * (1.0 - x)
        val = np.cos(th) * wk * k**3 * kk \
            * im_reflection(w, m) * im_reflection(nu, m) * cheb(nu)
        return np.where(live, val, 0.0)

    r = integrate_nd(f, [[0, s0], [-np.pi / 2, np.pi / 2], [0, 1]], spec)
    pref = 2.0 / np.pi**2
    return ForceResult((-pref * r.value, 0.0), "NonEqFDT", 3.0,
                       err=pref * r.err_estimate, converged=r.converged)

"""Atomic launch trajectories and their boost shape factors.

All paths move along x at height z: at rest in the far past (except for
uniform motion), accelerating around t = 0 over a duration ~tau, and ending
at constant speed v with the origin fixed so that x(t) -> v*t for t >> tau.
The shape factor Sigma(x) is the Fourier transform of the acceleration,
normalised by v, evaluated at frequency x/tau; it controls how strongly a
launch protocol excites the atom+field system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .quadrature import (
    QuadSpec,
    QuadResult,
    DomainError,
    filon_uniform,
    integrate_oscillatory,
)

__all__ = ["Trajectory", "TrajectoryKind", "shape_factor", "shape_factor_numeric"]

KINDS = ("constant", "sudden", "ramp", "smooth", "custom")
# accepted spellings for configs
KIND_ALIASES = {
    "constant": "constant", "constantvelocity": "constant",
    "sudden": "sudden", "suddenboost": "sudden",
    "ramp": "ramp", "linearramp": "ramp",
    "smooth": "smooth", "smoothboost": "smooth",
    "custom": "custom",
}
TrajectoryKind = str


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """Parallel-motion path family: kind, final speed v, launch duration tau."""

    kind: TrajectoryKind
    v: float
    tau: float = 0.0
    accel_t: np.ndarray | None = field(default=None, repr=False)
    accel_a: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TrajectoryError(f"unknown trajectory kind {self.kind!r}")
        if self.v < 0.0:
            raise TrajectoryError("final speed v must be >= 0")
        if self.kind in ("ramp", "smooth") and not self.tau > 0.0:
            raise TrajectoryError(f"{self.kind} launch needs tau > 0")
        if self.kind == "custom":
            if self.accel_t is None or self.accel_a is None:
                raise TrajectoryError("custom trajectory needs sampled a(t)")
            self._validate_samples()

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant_velocity(cls, v):
        return cls("constant", v)

    @classmethod
    def sudden_boost(cls, v):
        return cls("sudden", v)

    @classmethod
    def linear_ramp(cls, v, tau):
        return cls("ramp", v, tau)

    @classmethod
    def smooth_boost(cls, v, tau):
        return cls("smooth", v, tau)

    @classmethod
    def custom(cls, t, a):
        t = np.asarray(t, dtype=float)
        a = np.asarray(a, dtype=float)
        dt = t[1] - t[0] if t.size > 1 else 0.0
        v = float(np.trapezoid(a, t)) if t.size > 1 else 0.0
        tau = 0.5 * (t[-1] - t[0]) if t.size > 1 else 0.0
        obj = cls("custom", v, tau, accel_t=t, accel_a=a)
        return obj

    @classmethod
    def from_accel_file(cls, path):
        """Load a custom a(t) from a two-column text file with header '# t a'."""
        with open(path) as fh:
            header = fh.readline().strip()
            if header.replace(" ", "") != "#ta":
                raise TrajectoryError(f"{path}: expected header line '# t a'")
            data = np.loadtxt(fh)
        if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
            raise TrajectoryError(f"{path}: need at least 3 rows of (t, a)")
        return cls.custom(data[:, 0], data[:, 1])

    def _validate_samples(self):
        t, a = self.accel_t, self.accel_a
        if t.ndim != 1 or t.shape != a.shape or t.size < 3:
            raise TrajectoryError("custom samples must be matching 1-D arrays, >= 3 points")
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt[0]:
            raise TrajectoryError("custom t-grid must be uniform and increasing")
        if self.v > 0 and abs(np.trapezoid(a, t) - self.v) > 1e-10 * self.v:
            raise TrajectoryError("custom a(t) does not integrate to v")
        vel = np.concatenate([[0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * dt)])
        if np.any(np.diff(vel) < -1e-12 * max(self.v, 1.0)):
            warnings.warn(
                "custom velocity profile is non-monotonic: outside the regime "
                "covered by the launch analysis", stacklevel=3)
            object.__setattr__(self, "_outside_paper_regime", True)

    @property
    def outside_paper_regime(self) -> bool:
        return getattr(self, "_outside_paper_regime", False)

    # -- kinematics --------------------------------------------------------
    def position(self, t):
        """x(t); continuous, with x(t) = v*t for t >> tau."""
        t = np.asarray(t, dtype=float)
        v, tau = self.v, self.tau
        if self.kind == "constant":
            x = v * t
        elif self.kind == "sudden":
            x = v * np.maximum(t, 0.0)
        elif self.kind == "ramp":
            x = np.where(
                t <= -tau, 0.0,
                np.where(t <= tau, v * (t + tau) ** 2 / (4.0 * tau), v * t))
        elif self.kind == "smooth":
            # v*tau*softplus(t/tau), evaluated overflow-safely
            u = t / tau
            x = v * tau * (np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u))))
        else:
            x = np.interp(t, self.accel_t, self._custom_pos()) \
                + np.where(t > self.accel_t[-1], self.v * (t - self.accel_t[-1]), 0.0)
        return x if x.ndim else float(x)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        v, tau = self.v, self.tau
        if self.kind == "constant":
            out = np.full_like(t, v)
        elif self.kind == "sudden":
            out = np.where(t > 0.0, v, 0.0)
        elif self.kind == "ramp":
            out = np.where(t <= -tau, 0.0,
                           np.where(t <= tau, v * (t + tau) / (2.0 * tau), v))
        elif self.kind == "smooth":
            u = np.clip(t / tau, -700.0, 700.0)
            out = v / (1.0 + np.exp(-u))
        else:
            ts, a = self.accel_t, self.accel_a
            dt = ts[1] - ts[0]
            vel = np.concatenate([[0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * dt)])
            out = np.interp(t, ts, vel, left=0.0, right=vel[-1])
        return out if out.ndim else float(out)

    def acceleration(self, t):
        """a(t). Undefined for the sudden boost (a delta, never sampled)."""
        if self.kind == "sudden":
            raise TrajectoryError("sudden boost acceleration is a delta function")
        t = np.asarray(t, dtype=float)
        v, tau = self.v, self.tau
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "ramp":
            out = np.where((t > -tau) & (t <= tau), v / (2.0 * tau), 0.0)
        elif self.kind == "smooth":
            # v / (tau*(2 + 2 cosh(t/tau))) = (v/4tau) sech^2(t/2tau)
            e = np.exp(-np.abs(t) / tau)
            out = (v / tau) * e / (1.0 + e) ** 2
        else:
            out = np.interp(t, self.accel_t, self.accel_a, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def _custom_pos(self):
        ts, a = self.accel_t, self.accel_a
        dt = ts[1] - ts[0]
        vel = np.concatenate([[0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * dt)])
        pos = np.concatenate([[0.0], np.cumsum(0.5 * (vel[1:] + vel[:-1]) * dt)])
        # shift the origin so that x(t) -> v t at the end of the table
        return pos - (pos[-1] - self.v * ts[-1])

    @property
    def launch_window(self) -> tuple[float, float]:
        """Time span outside which the path is (numerically) inertial."""
        if self.kind == "constant":
            return (0.0, 0.0)
        if self.kind == "sudden":
            return (0.0, 0.0)
        if self.kind == "ramp":
            return (-self.tau, self.tau)
        if self.kind == "smooth":
            return (-40.0 * self.tau, 40.0 * self.tau)
        return (float(self.accel_t[0]), float(self.accel_t[-1]))


def shape_factor(traj: Trajectory, x) -> complex | np.ndarray:
    """Analytic Sigma(x) at x = (Omega+omega)*tau for the built-in kinds.

    constant -> 0, sudden -> 1, ramp -> sin(x)/x, smooth -> pi x / sinh(pi x);
    a custom path falls back to the sampled Fourier transform.
    """
    xa = np.asarray(x, dtype=float)
    if traj.kind == "constant":
        out = np.zeros_like(xa, dtype=complex)
    elif traj.kind == "sudden":
        out = np.ones_like(xa, dtype=complex)
    elif traj.kind == "ramp":
        out = np.sinc(xa / np.pi).astype(complex)
    elif traj.kind == "smooth":
        ax = np.pi * np.abs(xa)
        with np.errstate(over="ignore"):
            small = ax < 1.0
            out = np.where(
                small,
                np.divide(ax, np.sinh(np.where(small, ax, 1.0)), where=small),
                2.0 * ax * np.exp(-np.where(small, 0.0, ax))
                / (1.0 - np.exp(-2.0 * np.where(small, 1.0, ax))),
            )
        out = np.where(ax == 0.0, 1.0, out).astype(complex)
    else:
        if traj.tau <= 0:
            raise TrajectoryError("custom trajectory has no time scale")
        out = np.array([_sigma_custom(traj, xi / traj.tau) for xi in np.atleast_1d(xa)])
        out = out.reshape(xa.shape)
    return out if out.ndim else complex(out)


def _sigma_custom(traj: Trajectory, nu: float) -> complex:
    ts = traj.accel_t
    a = traj.accel_a
    dt = ts[1] - ts[0]
    if ts.size % 2 == 0:  # Filon needs an even panel count; support is compact
        ts = np.concatenate([ts, [ts[-1] + dt]])
        a = np.concatenate([a, [0.0]])
    return filon_uniform(a, dt, nu, ts[0]) / traj.v


def shape_factor_numeric(traj: Trajectory, omega_sum: float,
                         spec: QuadSpec | None = None) -> QuadResult:
    """Sigma from direct oscillatory quadrature of the acceleration transform.

    Serves as the oracle for the analytic forms and as the definition for
    custom paths; the sudden boost is returned analytically (its acceleration
    is a distribution).
    """
    spec = spec or QuadSpec(rel_tol=1e-9, abs_tol=1e-12)
    if traj.kind == "constant":
        return QuadResult(0.0 + 0.0j, 0.0, 0, True)
    if traj.kind == "sudden":
        return QuadResult(1.0 + 0.0j, 0.0, 0, True)
    if traj.kind == "custom":
        val = _sigma_custom(traj, omega_sum)
        return QuadResult(val, abs(val) * 1e-8, traj.accel_t.size, True)
    t0, t1 = traj.launch_window
    if traj.v == 0.0:
        return QuadResult(0.0 + 0.0j, 0.0, 0, True)
    r = integrate_oscillatory(lambda t: traj.acceleration(t) / traj.v,
                              omega_sum, t0, t1, spec)
    return QuadResult(r.value, r.err_estimate, r.evals, r.converged)

"""Right-hand sides and coordinate maps for a particle on a rotating saddle.

Units: saddle curvature and particle mass are 1, so the only parameter is
``eps = 1/omega``. Phase points are arrays whose last axis has length 4,
``(x1, x2, v1, v2)``; planar vectors have a last axis of length 2. Every
function broadcasts over leading axes so whole trajectories can be mapped at
once.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

J = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = np.eye(2)


class Frame(str, enum.Enum):
    INERTIAL = "inertial"
    ROTATING = "rotating"
    AVERAGED = "averaged"
    NAIVE = "naive"
    FIRST_NORMAL_FORM = "first_normal_form"


class ConfigError(ValueError):
    """Invalid simulation configuration."""


@dataclass(frozen=True)
class SimConfig:
    epsilon: float
    t_end: float
    dt: float | None = None
    initial: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    frame: Frame = Frame.INERTIAL
    sample_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))
        object.__setattr__(self, "initial", tuple(float(c) for c in self.initial))
        if self.dt is None:
            object.__setattr__(self, "dt", self.epsilon / 50)
        self.validate()

    def validate(self):
        eps = self.epsilon
        if not (isinstance(eps, (int, float)) and 0 < eps < 1):
            raise ConfigError(f"epsilon must lie in (0, 1), got {eps!r}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end!r}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        # resolve the forcing period pi*eps
        if self.dt > eps / 20 * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt} exceeds eps/20={eps / 20}")
        if len(self.initial) != 4 or not all(math.isfinite(c) for c in self.initial):
            raise ConfigError("initial state needs four finite components")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError("sample_every must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "t_end": self.t_end,
            "dt": self.dt,
            "initial": list(self.initial),
            "frame": self.frame.value,
            "sample_every": int(self.sample_every),
        }


def _apply(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def saddle_matrix(tau):
    """S(tau) = [[cos 2tau, sin 2tau], [sin 2tau, -cos 2tau]]; broadcasts over ``tau``."""
    c, s = np.cos(2 * np.asarray(tau, dtype=float)), np.sin(2 * np.asarray(tau, dtype=float))
    return np.stack([np.stack([c, s], -1), np.stack([s, -c], -1)], -2)


def rotation(theta):
    """Counterclockwise rotation by ``theta``."""
    c, s = np.cos(np.asarray(theta, dtype=float)), np.sin(np.asarray(theta, dtype=float))
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _split(s):
    s = np.asarray(s, dtype=float)
    return s[..., :2], s[..., 2:]


def _join(a, b):
    return np.concatenate([a, b], axis=-1)


# -- right-hand sides --------------------------------------------------------

def rhs_inertial(t, s, eps):
    """x'' = -S(t/eps) x."""
    x, v = _split(s)
    return _join(v, -_apply(saddle_matrix(np.asarray(t) / eps), x))


def rhs_rotating(s, omega):
    """Autonomous equations in the frame co-rotating with the saddle.

    Obtained by writing x = R(omega t) xi; carries the Coriolis term
    ``-2 omega J xi'`` and centrifugal term ``omega**2 xi``. Used only as an
    independent cross-check of the inertial equations.
    """
    xi, w = _split(s)
    d = np.array([1.0, -1.0])
    acc = -2 * omega * (w @ J.T) + omega**2 * xi - d * xi
    return _join(w, acc)


def rhs_averaged(s, eps):
    """Truncated guiding-center equations: u'' = (eps^3/4) J u' - (eps^2/4) u."""
    u, v = _split(s)
    return _join(v, eps**3 / 4 * (v @ J.T) - eps**2 / 4 * u)


def rhs_naive(s, eps):
    """Naive coefficient average: as :func:`rhs_averaged` with the magnetic sign flipped."""
    u, v = _split(s)
    return _join(v, -eps**3 / 4 * (v @ J.T) - eps**2 / 4 * u)


def rhs_first_normal_form(t, s, eps):
    x, v = _split(s)
    S = saddle_matrix(np.asarray(t) / eps)
    acc = (
        eps * _apply(S, v @ J.T)
        - eps**2 / 4 * x
        - eps**3 / 4 * (v @ J.T)
        + eps**4 / 16 * _apply(S, x)
    )
    return _join(v, acc)


# -- generator matrices (z' = A(t) z) -----------------------------------------

def _blocks(tl, tr, bl, br):
    return np.block([[tl, tr], [bl, br]])


def inertial_generator(t, eps):
    return _blocks(np.zeros((2, 2)), I2, -saddle_matrix(t / eps), np.zeros((2, 2)))


def rotating_generator(omega):
    d = np.diag([1.0, -1.0])
    return _blocks(np.zeros((2, 2)), I2, omega**2 * I2 - d, -2 * omega * J)


def averaged_matrix(eps, coriolis_sign=1.0):
    return _blocks(np.zeros((2, 2)), I2, -eps**2 / 4 * I2, coriolis_sign * eps**3 / 4 * J)


def first_normal_form_generator(t, eps):
    S = saddle_matrix(t / eps)
    bl = -eps**2 / 4 * I2 + eps**4 / 16 * S
    br = eps * S @ J - eps**3 / 4 * J
    return _blocks(np.zeros((2, 2)), I2, bl, br)


def forcing_period(eps):
    """Period in t of S(t/eps)."""
    return math.pi * eps


def system_for(frame: Frame | str, eps: float):
    """Return ``(generator, period)`` for a frame; ``period`` is None when autonomous."""
    frame = Frame(frame)
    if frame is Frame.INERTIAL:
        return (lambda t: inertial_generator(t, eps)), forcing_period(eps)
    if frame is Frame.FIRST_NORMAL_FORM:
        return (lambda t: first_normal_form_generator(t, eps)), forcing_period(eps)
    if frame is Frame.ROTATING:
        A = rotating_generator(1 / eps)
    elif frame is Frame.AVERAGED:
        A = averaged_matrix(eps)
    else:
        A = averaged_matrix(eps, coriolis_sign=-1.0)
    return (lambda t: A), None


def rhs_for(frame: Frame | str, eps: float):
    """State-form right-hand side ``f(t, s)`` for a frame."""
    frame = Frame(frame)
    return {
        Frame.INERTIAL: lambda t, s: rhs_inertial(t, s, eps),
        Frame.ROTATING: lambda t, s: rhs_rotating(s, 1 / eps),
        Frame.AVERAGED: lambda t, s: rhs_averaged(s, eps),
        Frame.NAIVE: lambda t, s: rhs_naive(s, eps),
        Frame.FIRST_NORMAL_FORM: lambda t, s: rhs_first_normal_form(t, s, eps),
    }[frame]


# -- frame changes -------------------------------------------------------------

def rotating_to_inertial(s, t, omega):
    """Map a rotating-frame phase point (xi, xi') at time t to (x, x')."""
    xi, w = _split(s)
    R = rotation(omega * np.asarray(t))
    return _join(_apply(R, xi), _apply(R, w + omega * (xi @ J.T)))


def inertial_to_rotating(s, t, omega):
    x, v = _split(s)
    Rinv = rotation(-omega * np.asarray(t))
    xi = _apply(Rinv, x)
    return _join(xi, _apply(Rinv, v) - omega * (xi @ J.T))


# -- guiding-center maps -------------------------------------------------------

def first_transform(x1, t, eps):
    """x = x1 + (eps^2/4) S(t/eps) x1."""
    x1 = np.asarray(x1, dtype=float)
    return x1 + eps**2 / 4 * _apply(saddle_matrix(np.asarray(t) / eps), x1)


def first_transform_inverse(x, t, eps):
    """Exact inverse of :func:`first_transform` (uses S^2 = I)."""
    x = np.asarray(x, dtype=float)
    q = eps**2 / 4
    return (x - q * _apply(saddle_matrix(np.asarray(t) / eps), x)) / (1 - q * q)


def first_transform_velocity(x1, v1, t, eps):
    """x' from (x1, x1') under :func:`first_transform`."""
    S = saddle_matrix(np.asarray(t) / eps)
    dS = -2 / eps * S @ J
    return np.asarray(v1) + eps**2 / 4 * (_apply(dS, x1) + _apply(S, v1))


def first_transform_inverse_state(s, t, eps):
    """Map an inertial phase point (x, x') to (x1, x1')."""
    x, v = _split(s)
    q = eps**2 / 4
    S = saddle_matrix(np.asarray(t) / eps)
    dS = -2 / eps * S @ J
    x1 = first_transform_inverse(x, t, eps)
    # (I + qS) x1' = x' - q S' x1
    rhs = v - q * _apply(dS, x1)
    v1 = (rhs - q * _apply(S, rhs)) / (1 - q * q)
    return _join(x1, v1)


def guiding_center(x, v, t, eps):
    """u = x - (eps^2/4) S(t/eps) (x - eps J v)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    S = saddle_matrix(np.asarray(t) / eps)
    return x - eps**2 / 4 * _apply(S, x - eps * (v @ J.T))


def hodograph(x1, v1, t, eps):
    """Guiding center read off from first-normal-form variables.

    u = x1 + (eps^3/4) S(t/eps) J v1. This is the position row of the inverse
    of the composed averaging transform; it agrees with :func:`guiding_center`
    to O(eps^4) once x1 is expressed through x.
    """
    S = saddle_matrix(np.asarray(t) / eps)
    return np.asarray(x1, dtype=float) + eps**3 / 4 * _apply(S, np.asarray(v1, dtype=float) @ J.T)


def guiding_center_derivatives(x, v, t, eps):
    """Closed-form (u, u', u'') along a solution of x'' = -S(t/eps) x.

    Each derivative is the plain product-rule expansion of the guiding-center
    map with S' = -(2/eps) S J, S'' = -(4/eps^2) S and x'' = -S x substituted;
    nothing is pre-simplified, so the O(1) cancellations happen in floating
    point.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    S = saddle_matrix(np.asarray(t) / eps)
    dS = -2 / eps * S @ J
    ddS = -4 / eps**2 * S
    a = -_apply(S, x)
    da = -_apply(dS, x) - _apply(S, v)
    q = eps**2 / 4

    w = x - eps * (v @ J.T)
    dw = v - eps * (a @ J.T)
    ddw = a - eps * (da @ J.T)

    u = x - q * _apply(S, w)
    du = v - q * (_apply(dS, w) + _apply(S, dw))
    ddu = a - q * (_apply(ddS, w) + 2 * _apply(dS, dw) + _apply(S, ddw))
    return u, du, ddu


def rest_initial_state(x0, eps):
    """Inertial state at t=0 with position ``x0`` whose guiding center starts at rest."""
    x0 = np.asarray(x0, dtype=float)
    S = saddle_matrix(0.0)
    # u' = v + (eps/2) S J x + (eps^2/4) S v + (eps^3/4) J x = 0 along solutions
    m = I2 + eps**2 / 4 * S
    rhs = -(eps / 2) * S @ J @ x0 - eps**3 / 4 * J @ x0
    return np.concatenate([x0, np.linalg.solve(m, rhs)])

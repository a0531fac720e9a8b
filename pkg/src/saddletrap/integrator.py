"""Fixed-step classic RK4, trajectory sampling, monodromy and 4x4 eigenvalues.

Two routes integrate the same scheme:

* :func:`integrate` steps any right-hand side ``f(t, z)``.
* :func:`integrate_linear` handles ``z' = A(t) z``. One RK4 step of a linear
  system is a matrix ``P`` applied to the state, so for periodic (or
  constant) ``A`` the per-step propagators repeat and long runs reduce to
  powers of a block propagator. Results agree with :func:`integrate` up to
  rounding.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np


class BlowUpError(RuntimeError):
    """The state became non-finite."""

    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:.17g}")
        self.t = t


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples. ``states`` has shape ``(n, *state_shape)``."""

    times: np.ndarray
    states: np.ndarray
    epsilon: float | None = None
    frame: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _step_count(t0: float, t_end: float, dt: float) -> tuple[int, float]:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    span = t_end - t0
    n = int(math.floor(span / dt + 1e-9))
    rest = span - n * dt
    if rest <= 1e-12 * max(1.0, abs(t_end)):
        rest = 0.0
    return n, rest


def rk4_step(f, t, z, h):
    k1 = f(t, z)
    k2 = f(t + h / 2, z + h / 2 * k1)
    k3 = f(t + h / 2, z + h / 2 * k2)
    k4 = f(t + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(f, initial, t0: float, t_end: float, dt: float, sample_every: int = 1) -> Trajectory:
    """Classic RK4 from ``t0`` to ``t_end``.

    The last step is shortened to land on ``t_end``. Samples are taken every
    ``sample_every`` steps, and the final state is always included.
    """
    n, rest = _step_count(t0, t_end, dt)
    z = np.array(initial, dtype=float)
    times, states = [t0], [z.copy()]
    for k in range(n):
        t = t0 + k * dt
        z = rk4_step(f, t, z, dt)
        if not np.all(np.isfinite(z)):
            raise BlowUpError(t + dt)
        if (k + 1) % sample_every == 0:
            times.append(t0 + (k + 1) * dt)
            states.append(z.copy())
    if rest:
        z = rk4_step(f, t0 + n * dt, z, rest)
        if not np.all(np.isfinite(z)):
            raise BlowUpError(t_end)
    if rest or n % sample_every:
        times.append(t_end)
        states.append(z.copy())
    return Trajectory(np.array(times), np.array(states))


def step_propagator(A, t: float, h: float) -> np.ndarray:
    """Matrix P with RK4(z' = A(t) z) = P z for one step of size ``h``."""
    A1, A2, A4 = A(t), A(t + h / 2), A(t + h)
    eye = np.eye(A1.shape[0])
    K1 = A1
    K2 = A2 @ (eye + h / 2 * K1)
    K3 = A2 @ (eye + h / 2 * K2)
    K4 = A4 @ (eye + h * K3)
    return eye + h / 6 * (K1 + 2 * K2 + 2 * K3 + K4)


def aligned_step(period: float, dt: float) -> tuple[int, float]:
    """Largest step <= ``dt`` that divides ``period`` evenly."""
    n = max(1, math.ceil(period / dt - 1e-9))
    return n, period / n


def integrate_linear(A, initial, t0: float, t_end: float, dt: float,
                     sample_every: int = 1, period: float | None = None,
                     autonomous: bool = False) -> Trajectory:
    """RK4 for ``z' = A(t) z`` via step propagators.

    ``period`` must be a whole number of steps ``dt`` (see
    :func:`aligned_step`); ``autonomous=True`` means ``A`` is constant.
    Without either, one propagator is built per step.
    """
    n, rest = _step_count(t0, t_end, dt)
    z0 = np.array(initial, dtype=float)
    dim = A(t0).shape[0]

    if autonomous:
        cycle = [step_propagator(A, t0, dt)]
    elif period is not None:
        ratio = period / dt
        N = int(round(ratio))
        if N < 1 or abs(ratio - N) > 1e-9 * max(1.0, ratio):
            raise ValueError("period must be an integer multiple of dt")
        cycle = [step_propagator(A, t0 + k * dt, dt) for k in range(N)]
    else:
        cycle = None

    if cycle is None or math.lcm(len(cycle), sample_every) > 50_000:
        return _integrate_linear_stepwise(A, z0, t0, t_end, dt, n, rest, sample_every, cycle)

    L = math.lcm(len(cycle), sample_every)
    phi = [np.eye(dim)]
    for j in range(L):
        phi.append(cycle[j % len(cycle)] @ phi[-1])
    phi_s = np.array(phi[sample_every::sample_every])   # (L/s, dim, dim)
    block_map = phi[L]

    n_blocks, tail = divmod(n, L)
    heads = np.empty((n_blocks + 1,) + z0.shape)
    heads[0] = z0
    for b in range(n_blocks):
        heads[b + 1] = block_map @ heads[b]
    inner = np.einsum("kij,bj...->bki...", phi_s, heads[:n_blocks]).reshape(
        (n_blocks * len(phi_s),) + z0.shape)
    states = [z0[None], inner]
    steps = list(range(sample_every, n_blocks * L + 1, sample_every))
    z = heads[n_blocks]
    for j in range(sample_every, tail + 1, sample_every):
        states.append((phi[j] @ z)[None])
        steps.append(n_blocks * L + j)
    z = phi[tail] @ z
    states = np.concatenate(states)
    times = t0 + np.array([0] + steps, dtype=float) * dt
    if rest:
        z = step_propagator(A, t0 + n * dt, rest) @ z
    if rest or n % sample_every:
        times = np.append(times, t_end)
        states = np.concatenate([states, z[None]])
    bad = ~np.all(np.isfinite(states.reshape(len(states), -1)), axis=1)
    if bad.any():
        raise BlowUpError(float(times[np.argmax(bad)]))
    return Trajectory(times, states)


def _integrate_linear_stepwise(A, z, t0, t_end, dt, n, rest, sample_every, cycle):
    times, states = [t0], [z.copy()]
    for k in range(n):
        P = cycle[k % len(cycle)] if cycle else step_propagator(A, t0 + k * dt, dt)
        z = P @ z
        if not np.all(np.isfinite(z)):
            raise BlowUpError(t0 + (k + 1) * dt)
        if (k + 1) % sample_every == 0:
            times.append(t0 + (k + 1) * dt)
            states.append(z.copy())
    if rest:
        z = step_propagator(A, t0 + n * dt, rest) @ z
    if rest or n % sample_every:
        times.append(t_end)
        states.append(z.copy())
    return Trajectory(np.array(times), np.array(states))


def monodromy(f, period: float, dt: float, t0: float = 0.0) -> np.ndarray:
    """State-transition matrix over one period of a linear ``f(t, z)``.

    Columns are the RK4 images of the basis vectors; the step is shrunk so a
    whole number of steps spans the period.
    """
    n, h = aligned_step(period, dt)
    Z = np.eye(4)
    # rows of Z are the propagated basis vectors
    for k in range(n):
        Z = rk4_step(f, t0 + k * h, Z, h)
        if not np.all(np.isfinite(Z)):
            raise BlowUpError(t0 + (k + 1) * h)
    return Z.T


def monodromy_linear(A, period: float, dt: float, t0: float = 0.0) -> np.ndarray:
    """Same as :func:`monodromy` for a generator ``A(t)``, via step propagators."""
    n, h = aligned_step(period, dt)
    M = np.eye(A(t0).shape[0])
    for k in range(n):
        M = step_propagator(A, t0 + k * h, h) @ M
    if not np.all(np.isfinite(M)):
        raise BlowUpError(t0 + period)
    return M


# -- 4x4 eigenvalues -------------------------------------------------------------

def charpoly4(m) -> np.ndarray:
    """Coefficients [1, c1, c2, c3, c4] of det(lambda I - m) by Faddeev-LeVerrier."""
    m = np.asarray(m, dtype=float)
    if m.shape != (4, 4):
        raise ValueError("4x4 matrix expected")
    coeffs = [1.0]
    M = np.zeros((4, 4))
    eye = np.eye(4)
    for k in range(1, 5):
        M = m @ M + coeffs[-1] * eye
        coeffs.append(-np.trace(m @ M) / k)
    return np.array(coeffs)


def _cubic_roots(a, b, c):
    """Roots of y^3 + a y^2 + b y + c (complex Cardano)."""
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c
    shift = -a / 3
    if abs(p) < 1e-300 and abs(q) < 1e-300:
        return [complex(shift)] * 3
    disc = cmath.sqrt(q * q / 4 + p**3 / 27)
    u3 = -q / 2 + disc
    if abs(u3) < abs(-q / 2 - disc):
        u3 = -q / 2 - disc
    u = u3 ** (1 / 3) if u3 != 0 else 0j
    omega = complex(-0.5, math.sqrt(3) / 2)
    roots = []
    for k in range(3):
        uk = u * omega**k
        vk = -p / (3 * uk) if uk != 0 else 0j
        roots.append(uk + vk + shift)
    return roots


def _polish(coeffs, z, iters=8):
    def f(x):
        return (((coeffs[0] * x + coeffs[1]) * x + coeffs[2]) * x + coeffs[3]) * x + coeffs[4]

    def df(x):
        return ((4 * coeffs[0] * x + 3 * coeffs[1]) * x + 2 * coeffs[2]) * x + coeffs[3]

    fz = abs(f(z))
    for _ in range(iters):
        d = df(z)
        if d == 0:
            break
        cand = z - f(z) / d
        fc = abs(f(cand))
        if fc >= fz:
            break
        z, fz = cand, fc
    return z


def quartic_roots(coeffs) -> list[complex]:
    """Roots of a monic quartic [1, a, b, c, d] by Ferrari, then Newton polish."""
    _, a, b, c, d = (complex(x) for x in coeffs)
    # depress: x = y - a/4  ->  y^4 + p y^2 + q y + r
    p = b - 3 * a * a / 8
    q = c - a * b / 2 + a**3 / 8
    r = d - a * c / 4 + a * a * b / 16 - 3 * a**4 / 256
    ys = []
    if abs(q) < 1e-14 * max(1.0, abs(p), abs(r)):
        for w in (-p / 2 + cmath.sqrt(p * p / 4 - r), -p / 2 - cmath.sqrt(p * p / 4 - r)):
            s = cmath.sqrt(w)
            ys += [s, -s]
    else:
        # resolvent: 8m^3 + 8p m^2 + (2p^2 - 8r) m - q^2 = 0
        ms = _cubic_roots(p, (2 * p * p - 8 * r) / 8, -q * q / 8)
        m = max(ms, key=abs)
        s = cmath.sqrt(2 * m)
        for sign in (1, -1):
            # y^2 - sign*s*y + (p/2 + m + sign*q/(2s)) = 0
            bq = -sign * s
            cq = p / 2 + m + sign * q / (2 * s)
            disc = cmath.sqrt(bq * bq - 4 * cq)
            ys += [(-bq + disc) / 2, (-bq - disc) / 2]
    poly = [complex(x) for x in coeffs]
    return _merge_pairs(poly, [_polish(poly, y - a / 4) for y in ys])


def _merge_pairs(poly, roots, rel=1e-6):
    """Snap near-coincident roots to the nearby root of the derivative.

    A double root is only found to about sqrt(machine eps) by Newton on the
    quartic, but it is a simple root of the derivative.
    """
    d = [4 * poly[0], 3 * poly[1], 2 * poly[2], poly[3]]
    dd = [3 * d[0], 2 * d[1], d[2]]

    def val(c, x):
        acc = 0j
        for ci in c:
            acc = acc * x + ci
        return acc

    roots = list(roots)
    scale = max(1.0, max(abs(r) for r in roots))
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(roots[i] - roots[j]) > rel * scale:
                continue
            z = (roots[i] + roots[j]) / 2
            for _ in range(20):
                g = val(dd, z)
                if g == 0:
                    break
                step = val(d, z) / g
                z -= step
                if abs(step) <= 1e-16 * scale:
                    break
            if abs(val(poly, z)) <= max(abs(val(poly, roots[i])), abs(val(poly, roots[j]))):
                roots[i] = roots[j] = z
    return roots


def eigen4(m) -> np.ndarray:
    """Eigenvalues of a real 4x4 matrix, sorted by modulus then angle."""
    m = np.asarray(m, dtype=float)
    scale = float(np.abs(m).max()) if m.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        if m.shape != (4, 4):
            raise ValueError("4x4 matrix expected")
        return np.zeros(4, dtype=complex) if scale == 0.0 else np.full(4, np.nan + 0j)
    # normalize so the characteristic polynomial neither underflows nor overflows
    roots = quartic_roots(charpoly4(m / scale))
    roots = [complex(z.real, 0.0) if abs(z.imag) < 1e-14 * max(1.0, abs(z)) else z for z in roots]
    roots.sort(key=lambda z: (round(abs(z), 12), cmath.phase(z)))
    return np.array(roots) * scale

"""Numerical experiments on the rotating saddle.

Residual scaling of the guiding-center equation, Floquet stability and its
threshold, precession of the guiding-center ellipse, the wrong-sign
comparison, and two small identities about the rotating force.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import dynamics as dyn
from .dynamics import Frame
from .integrator import BlowUpError, aligned_step, eigen4, integrate_linear, monodromy_linear

DT_FACTOR = 50          # default step is eps / DT_FACTOR
STABILITY_TOL = 1e-6


class DegenerateInputError(ValueError):
    pass


class NoTransitionError(RuntimeError):
    pass


class FitError(RuntimeError):
    pass


def default_dt(eps: float) -> float:
    return eps / DT_FACTOR


def simulate(frame: Frame | str, eps: float, initial, t_end: float, dt: float | None = None,
             sample_every: int = 10, t0: float = 0.0):
    """Integrate one of the model systems with the linear RK4 fast path.

    For time-periodic frames the step is shrunk so a whole number of steps
    spans the forcing period.
    """
    frame = Frame(frame)
    A, period = dyn.system_for(frame, eps)
    dt = dt or default_dt(eps)
    if period is not None:
        _, dt = aligned_step(period, dt)
        traj = integrate_linear(A, initial, t0, t_end, dt, sample_every, period=period)
    else:
        traj = integrate_linear(A, initial, t0, t_end, dt, sample_every, autonomous=True)
    return type(traj)(traj.times, traj.states, epsilon=eps, frame=frame.value, meta={"dt": dt})


# -- residual scaling ----------------------------------------------------------------

@dataclass
class ScalingReport:
    epsilons: list
    max_residuals: list
    fitted_slope: float
    fit_residual: float
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "max_residuals": self.max_residuals,
            "fitted_slope": self.fitted_slope,
            "fit_residual": self.fit_residual,
            "excluded": self.excluded,
        }


def guiding_center_residual(traj, eps: float) -> np.ndarray:
    """|u'' - (eps^3/4) J u' + (eps^2/4) u| at every sample of an inertial trajectory."""
    x, v = traj.states[:, :2], traj.states[:, 2:]
    u, du, ddu = dyn.guiding_center_derivatives(x, v, traj.times, eps)
    r = ddu - eps**3 / 4 * du @ dyn.J.T + eps**2 / 4 * u
    return np.linalg.norm(r, axis=1)


def residual_scan(epsilons, horizon: float = 50.0, initial=(1.0, 0.0, 0.0, 0.0),
                  sample_every: int = 10, dt_factor: float = DT_FACTOR) -> ScalingReport:
    eps_list = sorted((float(e) for e in epsilons), reverse=True)
    if len(set(eps_list)) != len(eps_list):
        raise ValueError("duplicate epsilon values")
    if any(not 0 < e <= 0.5 for e in eps_list):
        raise ValueError("each epsilon must lie in (0, 0.5]")
    if horizon < 20:
        raise ValueError("horizon must be at least 20")
    if not np.any(np.asarray(initial, dtype=float)):
        raise DegenerateInputError("degenerate initial state")
    kept, res, excluded = [], [], []
    for eps in eps_list:
        try:
            traj = simulate(Frame.INERTIAL, eps, initial, horizon, eps / dt_factor, sample_every)
        except BlowUpError as exc:
            excluded.append({"epsilon": eps, "blowup_t": exc.t})
            continue
        kept.append(eps)
        res.append(float(guiding_center_residual(traj, eps).max()))
    if len(kept) < 2:
        raise ValueError("need at least two usable epsilon values")
    lx, ly = np.log(kept), np.log(res)
    slope, icpt = np.polyfit(lx, ly, 1)
    fit_res = float(np.sqrt(np.mean((ly - (slope * lx + icpt)) ** 2)))
    return ScalingReport(kept, res, float(slope), fit_res, excluded)


# -- Floquet stability ---------------------------------------------------------------

@dataclass
class FloquetReport:
    epsilon: float
    multipliers: np.ndarray
    max_modulus: float
    stable: bool
    determinant: float
    blowup: bool = False

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "multipliers": [[float(z.real), float(z.imag)] for z in self.multipliers],
            "max_modulus": self.max_modulus,
            "stable": bool(self.stable),
            "determinant": self.determinant,
        }


def floquet_stability(eps: float, dt: float | None = None, tol: float = STABILITY_TOL) -> FloquetReport:
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    A, period = dyn.system_for(Frame.INERTIAL, eps)
    try:
        M = monodromy_linear(A, period, dt or default_dt(eps))
    except BlowUpError:
        return FloquetReport(eps, np.full(4, np.nan), math.inf, False, math.nan, blowup=True)
    mult = eigen4(M)
    mmax = float(np.abs(mult).max())
    return FloquetReport(eps, mult, mmax, mmax <= 1 + tol, float(np.linalg.det(M)))


@dataclass
class SweepResult:
    epsilons: np.ndarray
    max_moduli: np.ndarray
    stable: np.ndarray
    eps_critical: float
    transitions: int

    def to_dict(self) -> dict:
        return {"eps_critical": self.eps_critical, "transitions": self.transitions,
                "n": int(len(self.epsilons)),
                "eps_min": float(self.epsilons[0]), "eps_max": float(self.epsilons[-1])}


def stability_sweep(eps_min: float, eps_max: float, n: int = 64, dt_factor: float = DT_FACTOR,
                    xtol: float = 1e-6) -> SweepResult:
    """Scan max Floquet multiplier modulus on a grid, then bisect the stable/unstable edge."""
    if not 0 < eps_min < eps_max:
        raise ValueError("need 0 < eps_min < eps_max")
    if n < 16:
        raise ValueError("n must be at least 16")

    def report(e):
        return floquet_stability(e, e / dt_factor)

    grid = np.linspace(eps_min, eps_max, n)
    reps = [report(e) for e in grid]
    stable = np.array([r.stable for r in reps])
    moduli = np.array([r.max_modulus for r in reps])
    flips = np.nonzero(stable[1:] != stable[:-1])[0]
    if len(flips) == 0:
        raise NoTransitionError(f"no transition in [{eps_min}, {eps_max}]")
    i = flips[0]
    lo, hi = grid[i], grid[i + 1]
    lo_stable = stable[i]
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if report(mid).stable == lo_stable:
            lo = mid
        else:
            hi = mid
    return SweepResult(grid, moduli, stable, 0.5 * (lo + hi), int(len(flips)))


# -- precession ----------------------------------------------------------------------

@dataclass
class TwoFrequencyFit:
    nu_plus: float
    nu_minus: float
    c_plus: complex
    c_minus: complex
    rms: float
    degenerate: bool = False


def _design(t, nus):
    return np.exp(1j * np.outer(t, nus))


def _fft_peaks(t, z, pad=8):
    dt = t[1] - t[0]
    n = len(z) * pad
    power = np.abs(np.fft.fft(z, n))
    freqs = 2 * np.pi * np.fft.fftfreq(n, dt)
    pos, neg = freqs > 0, freqs < 0
    return freqs[pos][np.argmax(power[pos])], freqs[neg][np.argmax(power[neg])]


def fit_two_frequencies(t, z, guess=None) -> TwoFrequencyFit:
    """Least-squares fit z(t) = c+ e^{i nu+ t} + c- e^{i nu- t} (variable projection).

    ``t`` must be uniformly spaced. The initial frequencies come from the
    peaks of a zero-padded FFT on each side of zero unless ``guess`` is given.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=complex)
    if len(t) < 8:
        raise FitError("too few samples")
    if guess is None:
        guess = _fft_peaks(t, z)
    scale = t[-1] - t[0]
    tn = (t - t[0]) / scale

    def coeffs(p):
        E = _design(tn, p)
        c, *_ = np.linalg.lstsq(E, z, rcond=None)
        return E, c

    def resid(p):
        E, c = coeffs(p)
        r = E @ c - z
        return np.concatenate([r.real, r.imag])

    p0 = np.array(guess, dtype=float) * scale
    sol = least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    if not sol.success:
        raise FitError(sol.message)
    _, c = coeffs(sol.x)
    # undo the time shift so coefficients refer to t = 0
    nus = sol.x / scale
    c = c * np.exp(-1j * nus * t[0])
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    order = np.argsort(-nus)
    nu_p, nu_m = nus[order]
    c_p, c_m = c[order]
    amp = max(abs(c_p), abs(c_m))
    degenerate = min(abs(c_p), abs(c_m)) < 1e-6 * amp
    return TwoFrequencyFit(float(nu_p), float(nu_m), complex(c_p), complex(c_m), rms, degenerate)


def apsidal_rate(t, u) -> float:
    """Secondary estimator: angular drift of the apocenters of a planar orbit."""
    t = np.asarray(t)
    r = np.hypot(u[:, 0], u[:, 1])
    idx = np.nonzero((r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:]))[0] + 1
    if len(idx) < 3:
        raise FitError("too few apocenters")
    ang = np.unwrap(2 * np.arctan2(u[idx, 1], u[idx, 0])) / 2
    return float(np.polyfit(t[idx], ang, 1)[0])


@dataclass
class PrecessionReport:
    epsilon: float
    frame: str
    measured_rate: float
    predicted_rate: float
    relative_error: float
    nu_plus: float
    nu_minus: float
    degenerate: bool = False

    @property
    def sign(self) -> str:
        return "prograde" if self.measured_rate > 0 else "retrograde"

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "frame": self.frame,
            "measured_rate": self.measured_rate,
            "predicted_rate": self.predicted_rate,
            "relative_error": self.relative_error,
            "sign": self.sign,
            "nu_plus": self.nu_plus,
            "nu_minus": self.nu_minus,
            "degenerate": bool(self.degenerate),
        }


def precession_horizon(eps: float, quarters: float = 2.0) -> float:
    """``quarters`` quarter-periods of the predicted precession."""
    return quarters * math.pi / (2 * eps**3 / 8)


def guiding_center_signal(eps: float, frame: str, horizon: float, initial=None):
    """Sample times and guiding-center positions for a precession measurement."""
    if frame == "full":
        init = dyn.rest_initial_state((1.0, 0.0), eps) if initial is None else np.asarray(initial, float)
        n, _ = aligned_step(dyn.forcing_period(eps), default_dt(eps))
        # one sample per forcing period
        traj = simulate(Frame.INERTIAL, eps, init, horizon, sample_every=n)
        x, v = traj.states[:, :2], traj.states[:, 2:]
        u = dyn.guiding_center(x, v, traj.times, eps)
    else:
        init = (1.0, 0.0, 0.0, 0.0) if initial is None else initial
        fr = Frame.AVERAGED if frame == "averaged" else Frame.NAIVE
        step = default_dt(eps)
        every = max(1, int(round(0.5 / step)))
        traj = simulate(fr, eps, init, horizon, step, sample_every=every)
        u = traj.states[:, :2]
    t = traj.times
    # drop a trailing partial-step sample so spacing stays uniform
    if len(t) > 2 and not math.isclose(t[-1] - t[-2], t[1] - t[0], rel_tol=1e-9):
        t, u = t[:-1], u[:-1]
    return t, u


def precession_rate(eps: float, frame: str = "averaged", horizon: float | None = None,
                    initial=None) -> PrecessionReport:
    """Signed precession rate of the guiding-center ellipse.

    The complex signal u1 + i u2 is fitted by two exponentials; the rate is the
    mean of the two frequencies (positive = counterclockwise = prograde).
    """
    if frame not in ("averaged", "full", "naive"):
        raise ValueError(f"unknown frame {frame!r}")
    if not 0 < eps <= 0.3:
        raise ValueError("epsilon must lie in (0, 0.3]")
    min_h = precession_horizon(eps, 1.0)
    horizon = horizon or precession_horizon(eps)
    if horizon < min_h * (1 - 1e-12):
        raise ValueError(f"horizon must be at least {min_h:.6g}")
    t, u = guiding_center_signal(eps, frame, horizon, initial)
    fit = fit_two_frequencies(t, u[:, 0] + 1j * u[:, 1], guess=(eps / 2, -eps / 2))
    if fit.degenerate:
        if abs(fit.c_plus) >= abs(fit.c_minus):
            rate = fit.nu_plus - eps / 2
        else:
            rate = fit.nu_minus + eps / 2
    else:
        rate = 0.5 * (fit.nu_plus + fit.nu_minus)
    pred = eps**3 / 8
    return PrecessionReport(eps, frame, rate, pred, abs(rate - pred) / pred,
                            fit.nu_plus, fit.nu_minus, fit.degenerate)


def averaged_frequencies(eps: float, coriolis_sign: float = 1.0) -> tuple[float, float]:
    """Roots of nu^2 - s (eps^3/4) nu - eps^2/4 = 0."""
    b = coriolis_sign * eps**3 / 4
    disc = math.sqrt(b * b + eps**2)
    return (b + disc) / 2, (b - disc) / 2


def naive_vs_true(eps: float, horizon: float | None = None) -> dict:
    true = precession_rate(eps, "averaged", horizon)
    naive = precession_rate(eps, "naive", horizon)
    half_gap = lambda r: 0.5 * (r.nu_plus - r.nu_minus)
    return {
        "epsilon": eps,
        "true": true.to_dict(),
        "naive": naive.to_dict(),
        "opposite_sign": true.measured_rate * naive.measured_rate < 0,
        "magnitude_ratio": abs(naive.measured_rate) / abs(true.measured_rate),
        "restoring_true": half_gap(true),
        "restoring_naive": half_gap(naive),
    }


# -- force identities ----------------------------------------------------------------

def constancy_check(eps: float, r0, n: int = 1000, periods: float = 5.0, co_rotating: bool = True) -> float:
    """Max deviation of S(t/eps) R(+-2t/eps) r0 from its value at t = 0."""
    r0 = np.asarray(r0, dtype=float)
    t = np.linspace(0.0, periods * dyn.forcing_period(eps), n)
    sign = 1.0 if co_rotating else -1.0
    R = dyn.rotation(sign * 2 * t / eps)
    vals = np.einsum("nij,njk,k->ni", dyn.saddle_matrix(t / eps), R, r0)
    return float(np.abs(vals - vals[0]).max())


def mean_force_check(x0, eps: float, n: int = 64, shifted: bool = True):
    """Period average of F1 = -S(x0 + (eps^2/4) S x0) (or of F0 = -S x0)."""
    x0 = np.asarray(x0, dtype=float)
    t = np.arange(n) * dyn.forcing_period(eps) / n
    S = dyn.saddle_matrix(t / eps)
    pos = x0 + (eps**2 / 4 * np.einsum("nij,j->ni", S, x0) if shifted else 0.0)
    F = -np.einsum("nij,nj->ni", S, np.broadcast_to(pos, (n, 2)))
    return F.mean(axis=0), -eps**2 / 4 * x0 if shifted else np.zeros(2)


def averaged_vs_direct(eps: float, horizon: float, initial=(1.0, 0.0, 0.0, 0.0), sample_every: int = 10) -> float:
    """Max gap between the extracted guiding center and the averaged system."""
    if not 0 < eps <= 0.2:
        raise ValueError("epsilon must lie in (0, 0.2]")
    initial = np.asarray(initial, dtype=float)
    full = simulate(Frame.INERTIAL, eps, initial, horizon, sample_every=sample_every)
    dt = full.meta["dt"]
    x, v = full.states[:, :2], full.states[:, 2:]
    u_direct = dyn.guiding_center(x, v, full.times, eps)
    u0, du0, _ = dyn.guiding_center_derivatives(initial[:2], initial[2:], 0.0, eps)
    avg = simulate(Frame.AVERAGED, eps, np.concatenate([u0, du0]), horizon, dt, sample_every)
    if len(avg.times) != len(full.times) or not np.allclose(avg.times, full.times, rtol=0, atol=1e-9):
        raise RuntimeError("sample grids differ")
    return float(np.linalg.norm(u_direct - avg.states[:, :2], axis=1).max())


# -- frame equivalence ---------------------------------------------------------------

@dataclass
class FrameCheck:
    epsilon: float
    dt: float
    gap: float              # inertial vs mapped rotating, max over samples
    convergence: float      # sum over both frames of the dt vs dt/2 change

    @property
    def ratio(self) -> float:
        return self.gap / self.convergence if self.convergence > 0 else math.inf

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "dt": self.dt, "gap": self.gap,
                "convergence": self.convergence, "ratio": self.ratio}


def _on_grid(coarse, fine) -> np.ndarray:
    idx = np.searchsorted(fine.times, coarse.times - 1e-12)
    if not np.allclose(fine.times[idx], coarse.times, rtol=0, atol=1e-9):
        raise RuntimeError("sample grids differ")
    return fine.states[idx]


def frame_equivalence(eps: float, horizon: float = 20.0, initial=(1.0, 0.0, 0.0, 0.3),
                      dt: float | None = None) -> FrameCheck:
    """Compare inertial solutions with rotating-frame solutions mapped back.

    ``initial`` is an inertial phase point. The convergence scale is the
    change in each frame's solution when the step is halved.
    """
    omega = 1 / eps
    s0 = np.asarray(initial, dtype=float)
    r0 = dyn.inertial_to_rotating(s0, 0.0, omega)
    _, h = aligned_step(dyn.forcing_period(eps), dt or eps / 20)

    def pair(step):
        a = simulate(Frame.INERTIAL, eps, s0, horizon, step, sample_every=1)
        r = simulate(Frame.ROTATING, eps, r0, horizon, step, sample_every=1)
        return a, r

    a1, r1 = pair(h)
    a2, r2 = pair(h / 2)
    mapped = dyn.rotating_to_inertial(r1.states, r1.times, omega)
    if len(r1.times) != len(a1.times):
        raise RuntimeError("sample grids differ")
    gap = float(np.abs(a1.states - mapped).max())
    conv = float(np.abs(a1.states - _on_grid(a1, a2)).max() + np.abs(r1.states - _on_grid(r1, r2)).max())
    return FrameCheck(eps, h, gap, conv)


# -- derivative consistency ----------------------------------------------------------

def derivative_fd_errors(eps: float, initial=(1.0, 0.0, 0.0, 0.3), t0: float = 1.0,
                         divisors=(2, 4, 8, 16), substeps: int = 32) -> np.ndarray:
    """Errors of central differences of u against the closed-form u', u''.

    For each ``h = eps / divisor`` returns ``[|u'_fd - u'|, |u''_fd - u''|]``
    at ``t0``; the solution is integrated with step ``h_min / substeps``.
    """
    A = dyn.system_for(Frame.INERTIAL, eps)[0]
    h_max, h_min = eps / min(divisors), eps / max(divisors)
    fine = h_min / substeps
    if any(max(divisors) % d for d in divisors):
        raise ValueError("divisors must all divide the largest one")
    if t0 <= h_max:
        raise ValueError("t0 must exceed the largest difference step")
    start = integrate_linear(A, initial, 0.0, t0 - h_max, fine).final
    n_side = round(h_max / fine)
    traj = integrate_linear(A, start, t0 - h_max, t0 - h_max + 2 * n_side * fine, fine)
    s = traj.states
    times = traj.times
    u = dyn.guiding_center(s[:, :2], s[:, 2:], times, eps)
    _, du, ddu = dyn.guiding_center_derivatives(s[n_side, :2], s[n_side, 2:], times[n_side], eps)
    out = []
    for d in divisors:
        k = round((eps / d) / fine)
        h = k * fine
        up, u0, um = u[n_side + k], u[n_side], u[n_side - k]
        out.append([np.abs((up - um) / (2 * h) - du).max(), np.abs((up - 2 * u0 + um) / h**2 - ddu).max()])
    return np.array(out)

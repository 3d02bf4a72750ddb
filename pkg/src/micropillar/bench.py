"""Michelson test bench: synthetic signals and (nu, Q) estimators.

The bench drives the pillar with a piezo actuator and reads its top face
with a Michelson interferometer locked at mid-fringe.  Two measurements
are emulated: a network-analyzer sweep of the complex response and a
free ring-down recorded through a zero-span envelope detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, signal
from scipy.ndimage import uniform_filter1d

from .budget import susceptibility
from .physmodel import OscillatorParams, ValidationError, validate

MIN_WINDOW_PERIODS = 10
LOW_SNR = 3.0


class UndersampledError(ValueError):
    pass


class NoPeakError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    sample_rate: float
    samples: np.ndarray = field(repr=False)
    start_time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValidationError("samples must be a non-empty 1-D array")

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class SweepResponse:
    frequencies: np.ndarray
    response: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "frequencies", np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "response", np.asarray(self.response, dtype=complex))
        if self.frequencies.shape != self.response.shape or self.frequencies.ndim != 1:
            raise ValidationError("frequencies and response must be 1-D arrays of equal length")
        if self.frequencies.size < 1 or np.any(np.diff(self.frequencies) <= 0):
            raise ValidationError("frequency grid must be strictly ascending")


@dataclass(frozen=True)
class InterferometerParams:
    wavelength: float = 1064e-9
    mean_intensity: float = 1.0
    visibility: float = 1.0
    operating_phase: float = math.pi / 2
    additive_noise_rms: float = 0.0
    jitter_rms: float = 0.0
    jitter_correlation_time: float = 10e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValidationError("wavelength must be positive")
        if not self.mean_intensity > 0:
            raise ValidationError("mean_intensity must be positive")
        if not 0 <= self.visibility <= 1:
            raise ValidationError("visibility must lie in [0, 1]")
        if not self.additive_noise_rms >= 0:
            raise ValidationError("additive_noise_rms must be non-negative")
        if not self.jitter_rms >= 0:
            raise ValidationError("jitter_rms must be non-negative")
        if not self.jitter_correlation_time > 0:
            raise ValidationError("jitter_correlation_time must be positive")


@dataclass(frozen=True)
class FitResult:
    frequency: float
    quality_factor: float
    amplitude: float
    residual_rms: float
    uncertainties: dict
    method: str
    unbounded: bool = False
    low_confidence: bool = False
    background: complex = 0j
    decay_time: Optional[float] = None
    snr: Optional[float] = None

    @property
    def linewidth(self) -> float:
        return self.frequency / self.quality_factor


# ---------------------------------------------------------------------------
# generators


def ou_phase(n: int, dt: float, rms: float, correlation_time: float,
             rng: np.random.Generator) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck phase samples (exact AR(1) discretization)."""
    if rms == 0 or n == 0:
        return np.zeros(n)
    a = math.exp(-dt / correlation_time)
    drive = rng.standard_normal(n) * rms * math.sqrt(1 - a * a)
    drive[0] = rng.standard_normal() * rms
    return signal.lfilter([1.0], [1.0, -a], drive)


def michelson_signal(x: TimeSeries, p: InterferometerParams) -> TimeSeries:
    """Photodiode intensity I = I0/2 (1 + V cos(4 pi x / lambda + phi0 + j)) + n."""
    rng = np.random.default_rng(p.seed)
    n = x.samples.size
    jitter = ou_phase(n, 1.0 / x.sample_rate, p.jitter_rms, p.jitter_correlation_time, rng)
    phase = 4 * math.pi * x.samples / p.wavelength + p.operating_phase + jitter
    out = 0.5 * p.mean_intensity * (1 + p.visibility * np.cos(phase))
    if p.additive_noise_rms > 0:
        out = out + rng.standard_normal(n) * p.additive_noise_rms
    return TimeSeries(x.sample_rate, out, x.start_time)


def mid_fringe_slope(p: InterferometerParams) -> float:
    """|dI/dx| at mid-fringe, 2 pi I0 V / lambda, in intensity units per metre."""
    return 2 * math.pi * p.mean_intensity * p.visibility / p.wavelength


def sweep_response(osc: OscillatorParams, drive_force: float, frequencies) -> SweepResponse:
    """Driven displacement x(nu) = F0 chi(2 pi nu)."""
    validate(osc)
    grid = np.asarray(frequencies, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("frequency grid must be positive")
    return SweepResponse(grid, drive_force * susceptibility(osc, grid))


def sweep_grid(osc: OscillatorParams, half_span_linewidths: float = 10.0, n_points: int = 401) -> np.ndarray:
    """Uniform grid nu_m +/- half_span linewidths."""
    half = half_span_linewidths * osc.linewidth
    return np.linspace(osc.frequency - half, osc.frequency + half, n_points)


def jittered_sweep(osc: OscillatorParams, drive_force: float, frequencies,
                   p: InterferometerParams, dwell_time: float = 0.1, substeps: int = 32) -> SweepResponse:
    """Network-analyzer sweep seen through a jittering interferometer.

    The jitter phase j(t) shifts the instantaneous detection frequency by
    (j(t) - j(t - tau_c)) / (2 pi tau_c).  Each grid point averages the
    complex response over ``substeps`` samples of that shift during its
    dwell time, which smears the line over the frequency excursions.
    """
    grid = np.asarray(frequencies, dtype=float)
    if p.jitter_rms == 0:
        return sweep_response(osc, drive_force, grid)
    rng = np.random.default_rng(p.seed)
    tau_c = p.jitter_correlation_time
    dt = dwell_time / substeps
    lag = max(1, int(round(tau_c / dt)))
    n = grid.size * substeps + lag
    j = ou_phase(n, dt, p.jitter_rms, tau_c, rng)
    dnu = (j[lag:] - j[:-lag]) / (2 * math.pi * lag * dt)
    shifted = grid[:, None] + dnu.reshape(grid.size, substeps)
    resp = drive_force * susceptibility(osc, shifted).mean(axis=1)
    return SweepResponse(grid, resp)


def synth_ringdown(osc: OscillatorParams, a0: float, duration: float, sample_rate: float,
                   snr: float = math.inf, seed: int = 0, mode: str = "full",
                   phase: float = 0.0) -> TimeSeries:
    """Free decay a0 exp(-pi nu t / Q) cos(2 pi nu t + phase) plus white noise of rms a0/snr.

    ``mode="envelope"`` emits only the decaying envelope, as a zero-span
    analyzer would, and accepts sample rates below the carrier.
    """
    validate(osc)
    if mode not in ("full", "envelope"):
        raise ValueError(f"mode must be 'full' or 'envelope' (got {mode!r})")
    if mode == "full" and not sample_rate > 2 * osc.frequency:
        raise UndersampledError(
            f"sample_rate {sample_rate!r} Hz does not resolve a {osc.frequency!r} Hz carrier"
        )
    if not duration > 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    env = a0 * np.exp(-math.pi * osc.frequency / osc.quality_factor * t)
    x = env if mode == "envelope" else env * np.cos(2 * math.pi * osc.frequency * t + phase)
    if math.isfinite(snr):
        x = x + rng.standard_normal(n) * (a0 / snr)
    return TimeSeries(sample_rate, x)


# ---------------------------------------------------------------------------
# estimators


def _sliding_mean(y: np.ndarray, window: int) -> np.ndarray:
    return uniform_filter1d(y, size=window, mode="nearest")


def _rough_frequency(y: np.ndarray, fs: float) -> float:
    # differencing whitens slow drifts (interferometer jitter) that would outrank the carrier
    head = np.diff(y[: min(y.size, (1 << 14) + 1)])
    mag = np.abs(np.fft.rfft(head * np.hanning(head.size)))
    mag[0] = 0
    k = int(np.argmax(mag))
    return k * fs / head.size


def _white_noise_variance(y: np.ndarray, c: float) -> float:
    """White-noise variance from y[n+1] + y[n-1] - 2c y[n], which cancels a tone with cos(w dt) = c."""
    e = y[2:] + y[:-2] - 2 * c * y[1:-1]
    return float(np.mean(e * e)) / (2 + 4 * c * c)


def zero_crossing_frequency(y: np.ndarray, fs: float, hysteresis: np.ndarray,
                            nu_guess: Optional[float] = None):
    """Carrier frequency from upward zero crossings.

    Upward crossings are counted with a hysteresis band so that noise near
    zero cannot add cycles; crossing instants are linearly interpolated and
    the frequency is the slope of a line through (cycle index, time).  With
    ``nu_guess`` the cycle index advances by the rounded number of periods
    between crossings, so cycles missed near the Nyquist limit do not bias
    the count.  Returns ``(frequency, 1-sigma, number of crossings)``.
    """
    state = np.where(y > hysteresis, 1, np.where(y < -hysteresis, -1, 0))
    idx = np.flatnonzero(state)
    if idx.size < 2:
        return math.nan, math.nan, 0
    s = state[idx]
    ups = idx[1:][(s[1:] == 1) & (s[:-1] == -1)]
    if ups.size < 3:
        return math.nan, math.nan, int(ups.size)
    # last non-positive sample before each upward arming point
    nonpos = np.where(y <= 0, np.arange(y.size), -1)
    last_nonpos = np.maximum.accumulate(nonpos)[ups]
    k = last_nonpos
    frac = -y[k] / (y[k + 1] - y[k])
    t = (k + frac) / fs
    if nu_guess is None:
        cycles = np.arange(t.size, dtype=float)
    else:
        steps = np.maximum(1.0, np.round(np.diff(t) * nu_guess))
        cycles = np.concatenate([[0.0], np.cumsum(steps)])
    (period, _), cov = np.polyfit(cycles, t, 1, cov=True)
    freq = 1.0 / period
    return freq, freq * math.sqrt(cov[0, 0]) / period, int(t.size)


def _line_fit(t: np.ndarray, y: np.ndarray):
    a = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(1, t.size - 2)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(a.T @ a)
    return coef, cov


def _phasor(theta: float, offset: int, n: int, block: int = 4096) -> np.ndarray:
    """exp(1j theta k) for k = offset .. offset + n - 1, built blockwise to avoid n complex exps."""
    k = np.arange(block)
    starts = offset + block * np.arange(-(-n // block))
    out = np.exp(1j * theta * starts)[:, None] * np.exp(1j * theta * k)[None, :]
    return out.ravel()[:n]


def _lock_in(hp: np.ndarray, nu0: float, fs: float, window: int, offset: int = 0) -> np.ndarray:
    """Complex amplitude at nu0, averaged over ``window`` samples."""
    z = hp * _phasor(-2 * math.pi * nu0 / fs, offset, hp.size)
    return _sliding_mean(z.real, window) + 1j * _sliding_mean(z.imag, window)


def fit_ringdown(ts: TimeSeries, nu_hint: Optional[float] = None, window_periods: float = 20,
                 drop_fraction: float = 0.2, mode: str = "auto", envelope: str = "rms") -> FitResult:
    """Quality factor from a free-decay record.

    The slowly varying offset is removed with a sliding mean and the
    envelope is the sliding-window RMS over at least 10 carrier periods,
    like a zero-span analyzer.  ``envelope="lockin"`` instead demodulates
    at the carrier and averages over the same window, which rejects
    broadband noise and fast jitter outside the detection band.  The
    white-noise floor is subtracted and a straight line is fitted to
    log(envelope) down to ``drop_fraction`` of the initial amplitude.
    Q = pi nu tau, with nu from zero crossings of the carrier (after the
    same narrowband filter) unless ``nu_hint`` is given.
    """
    y = ts.samples
    fs = ts.sample_rate
    if mode == "auto":
        mode = "envelope" if nu_hint is not None and fs < 2 * nu_hint else "full"
    if mode not in ("full", "envelope"):
        raise ValueError(f"mode must be 'auto', 'full' or 'envelope' (got {mode!r})")
    if envelope not in ("rms", "lockin"):
        raise ValueError(f"envelope must be 'rms' or 'lockin' (got {envelope!r})")
    if mode == "envelope" and nu_hint is None:
        raise ValueError("an envelope record needs nu_hint for the carrier frequency")
    if window_periods < MIN_WINDOW_PERIODS:
        raise ValueError(f"window must span at least {MIN_WINDOW_PERIODS} carrier periods")

    if mode == "full":
        nu0 = nu_hint if nu_hint is not None else _rough_frequency(y, fs)
        if not nu0 > 0:
            raise ValueError("no carrier found in record")
        window = max(3, int(math.ceil(window_periods * fs / nu0)))
        hp = y - _sliding_mean(y, window)
        noise_var = _white_noise_variance(hp, math.cos(2 * math.pi * nu0 / fs))
        if envelope == "rms":
            power = 2.0 * (_sliding_mean(hp * hp, window) - noise_var)
        else:
            z = _lock_in(hp, nu0, fs, window)
            power = 4.0 * (z.real**2 + z.imag**2) - 4.0 * noise_var / window
        amp = np.sqrt(np.clip(power, 0.0, None))
    else:
        window = max(1, y.size // 500)
        hp = y
        noise_var = _white_noise_variance(y, 1.0)
        amp = np.sqrt(np.clip(_sliding_mean(y * y, window) - noise_var, 0.0, None))

    if y.size < 4 * window:
        raise ValueError("record too short for the envelope window")
    guard = window
    stride = max(1, window // 2)
    centers = np.arange(guard, y.size - guard, stride)
    env = amp[centers]
    a_start = float(np.median(env[:5]))
    noise_rms = math.sqrt(max(noise_var, 0.0))
    snr_est = a_start / noise_rms if noise_rms > 0 else math.inf

    below = np.flatnonzero(env < drop_fraction * a_start)
    stop = below[0] if below.size else env.size
    sel = centers[:stop]
    env_sel = env[:stop]
    positive = env_sel > 0
    sel, env_sel = sel[positive], env_sel[positive]
    if sel.size < 3:
        raise ValueError("too few envelope points above the fit threshold")
    t = ts.start_time + sel / fs
    (slope, intercept), cov = _line_fit(t, np.log(env_sel))
    sigma_slope = math.sqrt(max(cov[0, 0], 0.0))
    amplitude = math.exp(intercept + slope * ts.start_time)
    residual = float(np.sqrt(np.mean((env_sel - np.exp(intercept + slope * t)) ** 2)))

    if mode == "full" and nu_hint is None:
        # crossings only where the carrier stands well clear of the noise
        strong = sel[env_sel >= 0.5 * a_start]
        first, last = (strong[0], strong[-1]) if strong.size >= 2 else (sel[0], sel[-1])
        z = _lock_in(hp[first:last + 1], nu0, fs, window, offset=first)
        carrier = 2.0 * np.real(z * _phasor(2 * math.pi * nu0 / fs, first, z.size))
        nu, sigma_nu, _ = zero_crossing_frequency(carrier, fs, 0.5 * np.abs(2.0 * z), nu_guess=nu0)
        if not math.isfinite(nu):
            nu, sigma_nu = nu0, math.nan
    else:
        nu, sigma_nu = float(nu_hint), 0.0

    duration = ts.duration
    unbounded = slope >= -max(3 * sigma_slope, 1e-6 / duration)
    if unbounded:
        q, tau, sigma_q = math.inf, math.inf, math.nan
    else:
        tau = -1.0 / slope
        q = math.pi * nu * tau
        sigma_q = q * math.hypot(sigma_slope / slope, (sigma_nu / nu) if math.isfinite(sigma_nu) else 0.0)

    return FitResult(
        frequency=float(nu),
        quality_factor=float(q),
        amplitude=float(amplitude),
        residual_rms=residual,
        uncertainties={"frequency": float(sigma_nu), "quality_factor": float(sigma_q),
                       "decay_time": float(tau * sigma_slope / abs(slope)) if not unbounded else math.nan},
        method=f"ringdown/{mode}: {'lock-in' if mode == 'full' and envelope == 'lockin' else 'sliding-RMS'} envelope ({window} samples), log-linear fit",
        unbounded=bool(unbounded),
        low_confidence=bool(snr_est < LOW_SNR),
        decay_time=float(tau),
        snr=float(snr_est),
    )


def _half_power_width(nu: np.ndarray, power: np.ndarray, k: int) -> float:
    half = power[k] / 2
    left = k
    while left > 0 and power[left] > half:
        left -= 1
    right = k
    while right < power.size - 1 and power[right] > half:
        right += 1
    def cross(i, j):
        if power[i] == power[j]:
            return nu[i]
        return nu[i] + (half - power[i]) * (nu[j] - nu[i]) / (power[j] - power[i])
    lo = cross(left, left + 1) if power[left] <= half else nu[0]
    hi = cross(right - 1, right) if power[right] <= half else nu[-1]
    return max(hi - lo, nu[1] - nu[0])


def lorentzian_model(nu, nu0: float, q: float, amplitude: float, background: complex = 0j):
    """Complex response a (nu0^2/Q) / (nu0^2 - nu^2 + i nu nu0 / Q) + c; |.| = a at nu0 when c = 0."""
    nu = np.asarray(nu, dtype=float)
    return amplitude * (nu0**2 / q) / (nu0**2 - nu**2 + 1j * nu * nu0 / q) + background


def fit_lorentzian(sweep: SweepResponse, background: Optional[complex] = None) -> FitResult:
    """Least-squares fit of |x(nu) + c|^2 to the swept power response.

    With ``background`` given, c is held fixed; otherwise it is fitted as a
    complex constant, which absorbs the Fano-like asymmetry from RF pickup.
    """
    nu = sweep.frequencies
    power = np.abs(sweep.response) ** 2
    k = int(np.argmax(power))
    p_peak = float(power[k])
    if p_peak <= 0:
        raise NoPeakError("response is identically zero")
    if k == 0 or k == nu.size - 1:
        raise NoPeakError("response maximum lies on the edge of the frequency grid")
    nu_init = float(nu[k])
    width = _half_power_width(nu, power, k)
    q_init = nu_init / width
    a_init = math.sqrt(p_peak)
    fixed = background is not None

    def unpack(theta):
        nu0 = nu_init + width * theta[0]
        q = q_init * math.exp(theta[1])
        amp = a_init * theta[2]
        c = complex(background) if fixed else a_init * complex(theta[3], theta[4])
        return nu0, q, amp, c

    def residuals(theta):
        nu0, q, amp, c = unpack(theta)
        return (np.abs(lorentzian_model(nu, nu0, q, amp, c)) ** 2 - power) / p_peak

    theta0 = np.array([0.0, 0.0, 1.0] + ([] if fixed else [0.0, 0.0]))
    sol = optimize.least_squares(residuals, theta0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                 max_nfev=20000)
    nu0, q, amp, c = unpack(sol.x)
    if amp < 0:
        amp, c = -amp, -c
    res = sol.fun * p_peak
    dof = max(1, nu.size - sol.x.size)
    residual_rms = float(np.sqrt(np.sum(res**2) / dof))
    prominence = p_peak - float(np.median(power))
    if prominence <= 3 * residual_rms:
        raise NoPeakError(
            f"no resolvable peak: prominence {prominence:.3g} < 3 x residual rms {residual_rms:.3g}"
        )

    jac = sol.jac
    s2 = float(np.sum(sol.fun**2)) / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
        sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        sig = np.full(sol.x.size, np.nan)
    unc = {
        "frequency": float(width * sig[0]),
        "quality_factor": float(q * sig[1]),
        "amplitude": float(a_init * sig[2]),
    }
    if not fixed:
        unc["background_real"] = float(a_init * sig[3])
        unc["background_imag"] = float(a_init * sig[4])

    return FitResult(
        frequency=float(nu0),
        quality_factor=float(q),
        amplitude=float(abs(amp)),
        residual_rms=residual_rms,
        uncertainties=unc,
        method="sweep: least squares on |x + c|^2" + (" (fixed background)" if fixed else ""),
        background=complex(c),
    )


def dynamic_range_db(sweep: SweepResponse) -> float:
    """Peak |x| over the larger of the two grid-edge values, in dB."""
    mag = np.abs(sweep.response)
    edge = max(mag[0], mag[-1])
    return float(20 * math.log10(mag.max() / edge))

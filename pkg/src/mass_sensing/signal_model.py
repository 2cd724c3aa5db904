"""Multiband test signals, channel fading and branch sampling."""

import math
from dataclasses import dataclass

import numpy as np

CHANNEL_KINDS = ("awgn", "rayleigh", "lognormal_shadow")


class SignalSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SubbandSpec:
    """One occupied subband: carrier ``f_l``, bandwidth ``B_l`` and linear power ``E_l``."""

    carrier_hz: float
    bandwidth_hz: float
    power: float = 1.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise SignalSpecError(f"subband bandwidth must be positive, got {self.bandwidth_hz}")
        if self.carrier_hz < 0:
            raise SignalSpecError(f"subband carrier must be non-negative, got {self.carrier_hz}")
        if self.power < 0:
            raise SignalSpecError(f"subband power must be non-negative, got {self.power}")

    @property
    def low_hz(self):
        return self.carrier_hz - self.bandwidth_hz / 2

    @property
    def high_hz(self):
        return self.carrier_hz + self.bandwidth_hz / 2


@dataclass(frozen=True)
class ToneSpec:
    """Cosine sitting exactly on Nyquist DFT bin ``bin`` (``bin=0`` is a DC offset)."""

    bin: int
    amplitude: float = 1.0

    def __post_init__(self):
        if self.bin < 0:
            raise SignalSpecError("tone bin must be >= 0 (the mirror image is implied)")


@dataclass(frozen=True)
class WidebandSignalSpec:
    """Ground-truth wideband signal.

    ``bandwidth_hz`` is the filter bandwidth W, ``observation_s`` the window T.
    The Nyquist reference uses ``N = 2*W*T`` samples, so bin ``n`` of the
    centered Nyquist spectrum sits at ``n / T`` Hz. Sinc pulses peak at
    ``pulse_center_s`` before any branch offset is applied.
    """

    bandwidth_hz: float
    observation_s: float
    subbands: tuple = ()
    noise_power: float = 1.0
    rng_seed: int = 0
    tones: tuple = ()
    pulse_center_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "subbands", tuple(self.subbands))
        object.__setattr__(self, "tones", tuple(self.tones))
        if not (self.bandwidth_hz > 0 and self.observation_s > 0):
            raise SignalSpecError("bandwidth and observation time must be positive")
        n = 2 * self.bandwidth_hz * self.observation_s
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise SignalSpecError(f"2*W*T = {n!r} is not a positive integer")
        if self.noise_power < 0:
            raise SignalSpecError("noise_power must be non-negative")
        for sb in self.subbands:
            if sb.high_hz > self.bandwidth_hz * (1 + 1e-12):
                raise SignalSpecError(
                    f"subband at {sb.carrier_hz} Hz extends past W = {self.bandwidth_hz} Hz"
                )
        spans = sorted((sb.low_hz, sb.high_hz) for sb in self.subbands)
        for (lo0, hi0), (lo1, hi1) in zip(spans, spans[1:]):
            if lo1 < hi0:
                raise SignalSpecError(f"subbands [{lo0}, {hi0}] and [{lo1}, {hi1}] overlap")
        for tone in self.tones:
            if 2 * tone.bin >= self.nyquist_n:
                raise SignalSpecError(f"tone bin {tone.bin} is at or above N/2")

    @property
    def nyquist_n(self):
        return int(round(2 * self.bandwidth_hz * self.observation_s))

    @property
    def nyquist_rate_hz(self):
        return self.nyquist_n / self.observation_s

    @property
    def powers(self):
        return np.array([sb.power for sb in self.subbands], dtype=float)

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return WidebandSignalSpec(**kw)


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "awgn"
    shadow_sigma_db: float = 0.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise SignalSpecError(f"channel kind must be one of {CHANNEL_KINDS}, got {self.kind!r}")
        if self.kind == "lognormal_shadow" and not self.shadow_sigma_db > 0:
            raise SignalSpecError("lognormal_shadow needs shadow_sigma_db > 0")


@dataclass(frozen=True)
class BranchOffset:
    delta_s: float = 0.0

    def __post_init__(self):
        if self.delta_s < 0:
            raise SignalSpecError("branch offset must be non-negative")


def _check_powers(spec, powers):
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (len(spec.subbands),):
        raise SignalSpecError(
            f"expected {len(spec.subbands)} subband powers, got shape {powers.shape}"
        )
    return powers


def subband_waveforms(spec, t):
    """Unit-power waveform of every subband at times ``t``; shape ``(N_b, len(t))``.

    Row ``l`` is ``B_l * sinc(B_l*tau) * cos(2*pi*f_l*tau)`` with
    ``tau = t - pulse_center_s``. Scaling row ``l`` by ``sqrt(E_l)`` gives the
    subband's contribution.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not spec.subbands:
        return np.zeros((0, t.size))
    tau = t[None, :] - spec.pulse_center_s
    b = np.array([sb.bandwidth_hz for sb in spec.subbands])[:, None]
    f = np.array([sb.carrier_hz for sb in spec.subbands])[:, None]
    return b * np.sinc(b * tau) * np.cos(2 * np.pi * f * tau)


def tone_waveform(spec, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(t.size)
    for tone in spec.tones:
        out += tone.amplitude * np.cos(2 * np.pi * tone.bin * t / spec.observation_s)
    return out


def evaluate_signal(spec, powers, t):
    """Noise-free signal value(s) at time ``t`` (scalar or array).

    Any branch offset is expected to be folded into ``t`` by the caller.
    """
    powers = _check_powers(spec, powers)
    scalar = np.ndim(t) == 0
    wave = np.sqrt(powers) @ subband_waveforms(spec, t) + tone_waveform(spec, t)
    return float(wave[0]) if scalar else wave


def draw_fading(spec, channel, rng):
    """Per-subband received powers after one fading draw.

    Rayleigh gains are unit-mean exponential; log-normal shadowing uses a
    Gaussian dB gain whose mean is shifted so the linear gain has mean one.
    """
    powers = spec.powers
    if channel.kind == "awgn":
        return powers.copy()
    if channel.kind == "rayleigh":
        return powers * rng.exponential(1.0, size=powers.size)
    sigma = channel.shadow_sigma_db
    mean_db = -(sigma**2) * math.log(10) / 20
    gain_db = rng.normal(mean_db, sigma, size=powers.size)
    return powers * 10 ** (gain_db / 10)


def branch_times(spec, rate_hz, count):
    """Sampling instants ``m / f_i`` of one branch; ``count`` must equal ``f_i * T``."""
    if not rate_hz > 0:
        raise SignalSpecError("sampling rate must be positive")
    if abs(rate_hz * spec.observation_s - count) > 1e-6 * max(1, count):
        raise SignalSpecError(
            f"sample count {count} does not match rate*T = {rate_hz * spec.observation_s}"
        )
    return np.arange(count) / rate_hz


def sample_branch(spec, powers, rate_hz, offset, count, rng):
    """Samples ``y[m] = x(m/f_i - delta)`` plus white Gaussian noise.

    The offset delays this branch's copy of the signal, so a pulse that
    peaks at ``pulse_center_s`` appears at ``pulse_center_s + delta``.
    """
    t = branch_times(spec, rate_hz, count) - offset.delta_s
    y = evaluate_signal(spec, powers, t)
    if spec.noise_power > 0:
        y = y + rng.normal(0.0, math.sqrt(spec.noise_power), size=count)
    return y


def nyquist_reference_spectrum(spec, powers, include_noise=False, rng=None):
    """|DFT| of the Nyquist-rate frame on centered bins ``-N//2 .. ceil(N/2)-1``."""
    n = spec.nyquist_n
    x = evaluate_signal(spec, powers, np.arange(n) / spec.nyquist_rate_hz)
    if include_noise and spec.noise_power > 0:
        if rng is None:
            raise ValueError("include_noise requires an rng")
        x = x + rng.normal(0.0, math.sqrt(spec.noise_power), size=n)
    return np.abs(np.fft.fftshift(np.fft.fft(x)))


def power_for_snr(snr_db, spec):
    """Subband power ``E`` giving the requested per-bin SNR.

    SNR is measured on the Nyquist spectrum: expected signal energy per
    occupied bin over expected noise energy per bin. A full sinc pulse of
    power ``E`` puts ``N**2 * E / (4 T**2)`` into each of its ``2*B*T`` bins
    while noise contributes ``N * noise_power`` per bin.
    """
    n, t = spec.nyquist_n, spec.observation_s
    noise = spec.noise_power if spec.noise_power > 0 else 1.0
    return 4 * t**2 * noise * 10 ** (snr_db / 10) / n


def average_snr_db(spec):
    """Inverse of :func:`power_for_snr`, averaged over subbands (linear mean)."""
    if not spec.subbands or spec.noise_power <= 0:
        return float("inf") if spec.subbands else float("-inf")
    n, t = spec.nyquist_n, spec.observation_s
    snr = spec.powers * n / (4 * t**2 * spec.noise_power)
    return float(10 * np.log10(np.mean(snr)))


def random_layout(bandwidth_hz, count, bandwidth_range_hz, rng, power=1.0, guard_hz=0.0,
                  max_tries=10000):
    """Draw ``count`` non-overlapping subbands uniformly inside ``[0, W]``.

    Bandwidths are uniform on ``bandwidth_range_hz``; carriers are uniform
    over the positions that keep the subband inside the band. Overlapping
    draws (closer than ``guard_hz``) are rejected.
    """
    lo_bw, hi_bw = bandwidth_range_hz
    placed = []
    tries = 0
    while len(placed) < count:
        tries += 1
        if tries > max_tries:
            raise SignalSpecError(f"could not place {count} non-overlapping subbands")
        bw = rng.uniform(lo_bw, hi_bw)
        fc = rng.uniform(bw / 2 + guard_hz, bandwidth_hz - bw / 2 - guard_hz)
        if all(fc - bw / 2 >= sb.high_hz + guard_hz or fc + bw / 2 <= sb.low_hz - guard_hz
               for sb in placed):
            placed.append(SubbandSpec(float(fc), float(bw), float(power)))
    return tuple(sorted(placed, key=lambda sb: sb.carrier_hz))

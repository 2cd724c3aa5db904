"""Energy detection on a reconstructed spectrum."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .recovery import RecoveredSpectrum
from .sampler import centered_bins

H0 = "H0"
H1 = "H1"


class DegenerateSampleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BandSpec:
    """Frequency band ``[low_hz, high_hz]``; ``mirror`` also takes the negative image."""

    low_hz: float
    high_hz: float
    mirror: bool = False

    def __post_init__(self):
        if not self.low_hz < self.high_hz:
            raise ValueError(f"band needs low < high, got [{self.low_hz}, {self.high_hz}]")

    def columns(self, n, observation_s=1.0):
        """Positions of the centered ``n``-bin spectrum that fall inside the band."""
        freqs = centered_bins(n) / observation_s
        mask = (freqs >= self.low_hz) & (freqs <= self.high_hz)
        if self.mirror:
            mask |= (freqs >= -self.high_hz) & (freqs <= -self.low_hz)
        cols = np.flatnonzero(mask)
        if cols.size == 0:
            raise ValueError(f"band [{self.low_hz}, {self.high_hz}] Hz contains no bins")
        return cols

    @classmethod
    def for_subband(cls, subband, mirror=True):
        return cls(subband.low_hz, subband.high_hz, mirror)


@dataclass(frozen=True)
class DetectionDecision:
    energy: float
    threshold: float
    hypothesis: str


@dataclass(frozen=True)
class RocPoint:
    pfa: float
    pd: float
    threshold: float
    trials: int
    false_alarms: int = 0
    detections: int = 0


def band_energy(spectrum, band, observation_s=None):
    """Sum of squared magnitudes over the bins inside ``band``."""
    if isinstance(spectrum, RecoveredSpectrum):
        mag = spectrum.magnitude
        observation_s = spectrum.observation_s if observation_s is None else observation_s
    else:
        mag = np.asarray(spectrum, dtype=float)
    cols = band.columns(mag.size, 1.0 if observation_s is None else observation_s)
    return float(np.sum(mag[cols] ** 2))


def calibrate_threshold(h0_energies, target_pfa):
    """Empirical ``1 - target_pfa`` quantile of noise-only band energies."""
    h0 = np.asarray(h0_energies, dtype=float)
    if h0.size == 0:
        raise ValueError("need at least one H0 energy")
    if not 0 < target_pfa < 1:
        raise ValueError("target_pfa must lie in (0, 1)")
    if np.all(h0 == h0[0]):
        warnings.warn("all H0 energies are equal; threshold set to that value",
                      DegenerateSampleWarning, stacklevel=2)
        return float(h0[0])
    return float(np.quantile(h0, 1 - target_pfa, method="linear"))


def decide(energy, threshold):
    # energy == threshold stays H0
    return DetectionDecision(float(energy), float(threshold), H1 if energy > threshold else H0)


def roc_points(h0_energies, h1_energies, thresholds):
    """Empirical (pfa, pd) for each threshold, using the same trials for every point."""
    h0 = np.asarray(h0_energies, dtype=float)
    h1 = np.asarray(h1_energies, dtype=float)
    out = []
    for lam in thresholds:
        fa = int(np.sum(h0 > lam))
        det = int(np.sum(h1 > lam))
        out.append(RocPoint(fa / h0.size, det / h1.size, float(lam), int(h1.size), fa, det))
    return out


def roc_at_pfa(h0_energies, h1_energies, target_pfas):
    """ROC points at thresholds calibrated from the H0 sample for each target pfa."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSampleWarning)
        lams = [calibrate_threshold(h0_energies, p) for p in target_pfas]
    return roc_points(h0_energies, h1_energies, lams)


def empirical_roc(h0_energies, h1_energies):
    """Every achievable ``(pfa, pd)`` pair, strictest threshold first.

    Thresholds run over the distinct H0 energies from the largest down; the
    final point ``(1, 1)`` is the always-H1 detector.
    """
    h0 = np.sort(np.asarray(h0_energies, dtype=float))
    h1 = np.sort(np.asarray(h1_energies, dtype=float))
    if h0.size == 0 or h1.size == 0:
        raise ValueError("need H0 and H1 energies")
    lams = np.unique(h0)[::-1]
    pfa = 1 - np.searchsorted(h0, lams, side="right") / h0.size
    pd = 1 - np.searchsorted(h1, lams, side="right") / h1.size
    return np.append(pfa, 1.0), np.append(pd, 1.0), lams


def pd_at_pfa(h0_energies, h1_energies, pfa):
    """Pd at exactly ``pfa``, interpolating between achievable ROC points.

    Linear interpolation is the randomized test mixing the two neighbouring
    thresholds. It matters when noise-only energies pile up on one value,
    typically zero when recovery leaves the band empty.
    """
    xs, ys, _ = empirical_roc(h0_energies, h1_energies)
    return float(np.interp(pfa, xs, ys))


def randomized_roc_points(h0_energies, h1_energies, target_pfas):
    """ROC points at exactly each target pfa.

    ``threshold`` is the calibrated quantile; ``pd`` comes from
    :func:`pd_at_pfa`, i.e. the randomized test that hits the target pfa
    even when the H0 energies have ties at the threshold.
    """
    h0 = np.asarray(h0_energies, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSampleWarning)
        lams = [calibrate_threshold(h0, p) for p in target_pfas]
    n = len(h1_energies)
    out = []
    for p, lam in zip(target_pfas, lams):
        pd = pd_at_pfa(h0, h1_energies, p)
        out.append(RocPoint(float(p), pd, lam, n, round(p * h0.size), round(pd * n)))
    return out


def binomial_halfwidth(p, trials, sigmas=3.0):
    return sigmas * math.sqrt(max(p * (1 - p), 0.0) / trials)

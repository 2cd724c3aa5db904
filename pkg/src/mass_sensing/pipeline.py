"""Signal -> branches -> recovery -> detection, trial by trial.

Each trial draws its fading, offsets and noise from streams keyed by the
trial index, so the records are identical whether trials run serially or in
a process pool. The H0 run of a trial reuses the H1 draws with the target
subband removed (common random numbers).
"""

import csv
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .detection import (
    BandSpec,
    DegenerateSampleWarning,
    band_energy,
    calibrate_threshold,
    decide,
    randomized_roc_points,
    roc_points,
)
from .recovery import cosamp, estimate_sparsity, recovery_mse
from .rng import stream
from .sampler import branch_dft, stack_measurements
from .signal_model import (
    average_snr_db,
    branch_times,
    draw_fading,
    nyquist_reference_spectrum,
    subband_waveforms,
    tone_waveform,
)


@dataclass
class TrialRecord:
    trial: int
    mean_fading_gain: float
    max_offset_s: float
    sparsity: int
    mse: float
    support_hit_rate: float
    iterations: int
    h1_energy: float
    h0_energy: float
    band_energies: tuple
    noise_band_energies: tuple = ()
    h1_decision: str = ""
    h0_decision: str = ""


@dataclass
class PipelineResult:
    scenario: object
    records: list
    threshold: float
    band_thresholds: tuple = ()

    @property
    def h0_energies(self):
        return np.array([r.h0_energy for r in self.records])

    @property
    def h1_energies(self):
        return np.array([r.h1_energy for r in self.records])

    def occupancy(self):
        """Per-trial, per-band decisions (True = occupied) when the map was requested."""
        if not self.band_thresholds:
            return None
        e = np.array([r.band_energies for r in self.records])
        return e > np.asarray(self.band_thresholds)[None, :]


class _Context:
    """Everything a worker needs for one trial; built once per scenario."""

    def __init__(self, scenario):
        self.scenario = scenario
        self.spec = scenario.signal_spec()
        self.plan = scenario.sampling_plan()
        self.channel = scenario.channel_model()
        self.target = scenario.detection.target_band if self.spec.subbands else None
        t = self.spec.observation_s
        self.bands = tuple(BandSpec.for_subband(sb) for sb in self.spec.subbands)
        self.truth = nyquist_reference_spectrum(self.spec, self.spec.powers)
        self.fixed_k = None if scenario.recovery.sparsity == "auto" else scenario.recovery.sparsity
        self.times = [branch_times(self.spec, r, m)
                      for r, m in zip(self.plan.rates_hz, self.plan.branch_lengths)]
        self.observation_s = t

    def branch_parts(self, trial):
        sc, spec = self.scenario, self.spec
        gains, offsets, parts, rest = [], [], [], []
        for i, t in enumerate(self.times):
            powers = draw_fading(spec, self.channel, stream(sc.seed, "fading", trial, i))
            if spec.powers.size:
                nz = spec.powers > 0
                gains.append(np.mean(powers[nz] / spec.powers[nz]) if nz.any() else 1.0)
            delta = 0.0
            if sc.max_offset_fraction > 0:
                delta = stream(sc.seed, "offset", trial, i).uniform(
                    0.0, sc.max_offset_fraction * spec.observation_s)
            offsets.append(delta)
            tau = t - delta
            waves = np.sqrt(powers)[:, None] * subband_waveforms(spec, tau)
            noise = np.zeros(t.size)
            if spec.noise_power > 0:
                noise = stream(sc.seed, "noise", trial, i).normal(
                    0.0, np.sqrt(spec.noise_power), size=t.size)
            parts.append(waves)
            rest.append(tone_waveform(spec, tau) + noise)
        return parts, rest, gains, offsets

    def recover(self, samples):
        system = stack_measurements(self.plan, [branch_dft(y) for y in samples])
        k = self.fixed_k
        if k is None:
            k = estimate_sparsity(system, self.scenario.recovery.auto_max_sparsity,
                                  self.scenario.recovery_config(1))
        return cosamp(system, self.scenario.recovery_config(k), self.observation_s), k

    def energies(self, spectrum):
        return tuple(band_energy(spectrum, b) for b in self.bands)

    def run_trial(self, trial):
        parts, rest, gains, offsets = self.branch_parts(trial)
        h1 = [w.sum(axis=0) + r for w, r in zip(parts, rest)]
        rec1, k = self.recover(h1)
        e1 = self.energies(rec1)
        h1e = h0e = 0.0
        noise_e = ()
        if self.target is not None:
            h0 = [y - w[self.target] for y, w in zip(h1, parts)]
            rec0, _ = self.recover(h0)
            h1e = e1[self.target]
            h0e = band_energy(rec0, self.bands[self.target])
            if self.scenario.detection.occupancy_map:
                rec_noise, _ = self.recover(rest)
                noise_e = self.energies(rec_noise)
        top = np.argsort(-self.truth, kind="stable")[:k]
        truth_support = set(top[self.truth[top] > 0].tolist())
        hit = (len(truth_support & set(rec1.support)) / len(truth_support)
               if truth_support else 1.0)
        return TrialRecord(
            trial=trial,
            mean_fading_gain=float(np.mean(gains)) if gains else 1.0,
            max_offset_s=float(max(offsets)),
            sparsity=int(k),
            mse=recovery_mse(rec1, self.truth),
            support_hit_rate=float(hit),
            iterations=rec1.iterations,
            h1_energy=float(h1e),
            h0_energy=float(h0e),
            band_energies=tuple(float(e) for e in e1),
            noise_band_energies=tuple(float(e) for e in noise_e),
        )


def trial_samples(scenario, trial=0, hypothesis="H1"):
    """Branch sample vectors of one trial, in plan order."""
    ctx = _Context(scenario)
    parts, rest, _, offsets = ctx.branch_parts(trial)
    out = []
    for w, r in zip(parts, rest):
        y = w.sum(axis=0) + r
        if hypothesis == "H0" and ctx.target is not None:
            y = y - w[ctx.target]
        out.append(y)
    return ctx, out, offsets


def recover_trial(scenario, trial=0, hypothesis="H1"):
    ctx, samples, _ = trial_samples(scenario, trial, hypothesis)
    spectrum, _ = ctx.recover(samples)
    return spectrum


_WORKER_CONTEXT = None


def _init_worker(scenario):
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = _Context(scenario)


def _worker_trial(trial):
    return _WORKER_CONTEXT.run_trial(trial)


def thread_count():
    """Worker count from ``MASS_THREADS`` (default: all cores)."""
    raw = os.environ.get("MASS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"MASS_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_trials(scenario, threads=None):
    threads = thread_count() if threads is None else max(1, int(threads))
    trials = range(scenario.trials)
    if threads == 1 or scenario.trials == 1:
        ctx = _Context(scenario)
        return [ctx.run_trial(t) for t in trials]
    with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(scenario,)) as pool:
        records = list(pool.map(_worker_trial, trials, chunksize=max(1, scenario.trials // (4 * threads))))
    return sorted(records, key=lambda r: r.trial)


def run_pipeline(scenario, threads=None):
    """Run every trial, calibrate the detector on the H0 energies and decide.

    The threshold is the empirical quantile of the H0 target-band energies
    at the scenario's first target pfa.
    """
    records = run_trials(scenario, threads)
    pfa = scenario.detection.target_pfas[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSampleWarning)
        lam = calibrate_threshold([r.h0_energy for r in records], pfa)
        band_lams = ()
        if scenario.detection.occupancy_map and records and records[0].noise_band_energies:
            noise = np.array([r.noise_band_energies for r in records])
            band_lams = tuple(calibrate_threshold(noise[:, j], pfa) for j in range(noise.shape[1]))
    for r in records:
        r.h1_decision = decide(r.h1_energy, lam).hypothesis
        r.h0_decision = decide(r.h0_energy, lam).hypothesis
    return PipelineResult(scenario, records, lam, band_lams)


def roc_sweep(scenario, thresholds=None, target_pfas=None, threads=None, result=None):
    """ROC points for a scenario.

    With explicit ``thresholds`` (argument or scenario) every point is the
    achieved ``(pfa, pd)`` of that threshold on the same trials. Otherwise
    each target pfa gets a randomized-test point at exactly that pfa.
    """
    result = result or run_pipeline(scenario, threads)
    h0, h1 = result.h0_energies, result.h1_energies
    if thresholds is None:
        thresholds = scenario.detection.thresholds
    if thresholds is not None:
        return roc_points(h0, h1, thresholds)
    return randomized_roc_points(h0, h1, target_pfas or scenario.detection.target_pfas)


# -- output -------------------------------------------------------------------

ROC_COLUMNS = ["scenario_id", "channel", "snr_db", "compression_ratio", "threshold",
               "pfa", "pd", "trials"]


def roc_rows(scenario, points):
    spec = scenario.signal_spec()
    plan = scenario.sampling_plan()
    snr = scenario.signal.snr_db if scenario.signal.snr_db is not None else average_snr_db(spec)
    return [
        [scenario.name, scenario.channel.kind, repr(float(snr)), repr(plan.sum_ratio),
         repr(p.threshold), repr(p.pfa), repr(p.pd), p.trials]
        for p in points
    ]


def write_roc_csv(path, scenario, points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROC_COLUMNS)
        w.writerows(roc_rows(scenario, points))


TRIAL_COLUMNS = ["trial", "mean_fading_gain", "max_offset_s", "sparsity", "mse",
                 "support_hit_rate", "iterations", "h1_energy", "h0_energy",
                 "h1_decision", "h0_decision", "band_energies"]


def trial_rows(records):
    rows = []
    for r in records:
        d = asdict(r)
        row = [repr(d[c]) if isinstance(d[c], float) else d[c] for c in TRIAL_COLUMNS[:-1]]
        rows.append(row + [";".join(repr(e) for e in r.band_energies)])
    return rows


def write_trials_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        w.writerows(trial_rows(records))


def write_trials_json(path, records):
    with open(path, "w") as fh:
        json.dump([asdict(r) for r in records], fh, indent=1)
        fh.write("\n")

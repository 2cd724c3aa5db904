"""JSON scenario files.

A scenario bundles everything one experiment needs: the signal, the branch
plan, the channel, recovery settings, detection targets, trial count and
the seed. See ``docs/schema.md`` for the annotated format.
"""

import json
from dataclasses import asdict, dataclass, field, fields

from .recovery import SparseRecoveryConfig
from .rng import stream
from .sampler import PlanError, SamplingPlan, select_primes
from .signal_model import (
    ChannelModel,
    SignalSpecError,
    SubbandSpec,
    ToneSpec,
    WidebandSignalSpec,
    power_for_snr,
    random_layout,
)


class ConfigError(ValueError):
    """Raised for any invalid scenario document."""


def _take(d, cls, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class LayoutConfig:
    count: int
    bandwidth_range_hz: list
    guard_hz: float = 0.0


@dataclass
class SignalConfig:
    bandwidth_hz: float
    observation_s: float
    noise_power: float = 1.0
    pulse_center_fraction: float = 0.0
    snr_db: float = None
    subbands: list = field(default_factory=list)
    layout: LayoutConfig = None
    tones: list = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.layout, dict):
            self.layout = _take(self.layout, LayoutConfig, "signal.layout")
        if self.layout is not None and self.subbands:
            raise ConfigError("signal: give either explicit subbands or a layout, not both")


@dataclass
class PlanConfig:
    v: int = None
    scale: float = 1.0
    primes: list = None

    def __post_init__(self):
        if (self.v is None) == (self.primes is None):
            raise ConfigError("plan: give exactly one of 'v' (with 'scale') or 'primes'")


@dataclass
class ChannelConfig:
    kind: str = "awgn"
    shadow_sigma_db: float = 0.0


@dataclass
class RecoveryConfig:
    sparsity: object = 1
    max_iterations: int = 50
    residual_tolerance: float = 1e-6
    auto_max_sparsity: int = 64


@dataclass
class DetectionConfig:
    target_band: int = 0
    target_pfas: list = field(default_factory=lambda: [0.05, 0.1, 0.2])
    thresholds: list = None
    occupancy_map: bool = False


@dataclass
class Scenario:
    name: str
    seed: int
    signal: SignalConfig
    plan: PlanConfig
    trials: int = 100
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    max_offset_fraction: float = 0.0
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    output_dir: str = "out"

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not 0 <= self.max_offset_fraction < 1:
            raise ConfigError("max_offset_fraction must lie in [0, 1)")
        sp = self.recovery.sparsity
        if sp != "auto" and (not isinstance(sp, int) or sp < 1):
            raise ConfigError("recovery.sparsity must be a positive integer or 'auto'")
        for p in self.detection.target_pfas:
            if not 0 < p < 1:
                raise ConfigError(f"target pfa {p} outside (0, 1)")
        # fail early on anything that cannot be built
        try:
            ChannelModel(self.channel.kind, self.channel.shadow_sigma_db)
            spec = self.signal_spec()
            self.sampling_plan()
        except (SignalSpecError, PlanError) as exc:
            raise ConfigError(str(exc)) from None
        if spec.subbands and not 0 <= self.detection.target_band < len(spec.subbands):
            raise ConfigError(f"target_band {self.detection.target_band} out of range")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("scenario must be a JSON object")
        d = dict(d)
        for key in ("name", "seed", "signal", "plan"):
            if key not in d:
                raise ConfigError(f"scenario is missing required key {key!r}")
        d["signal"] = _take(d["signal"], SignalConfig, "signal")
        d["plan"] = _take(d["plan"], PlanConfig, "plan")
        d["channel"] = _take(d.get("channel", {}), ChannelConfig, "channel")
        d["recovery"] = _take(d.get("recovery", {}), RecoveryConfig, "recovery")
        d["detection"] = _take(d.get("detection", {}), DetectionConfig, "detection")
        return _take(d, cls, "scenario")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def with_overrides(self, seed=None, trials=None, **changes):
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if trials is not None:
            d["trials"] = trials
        d.update(changes)
        return Scenario.from_dict(d)

    # -- resolved objects -------------------------------------------------

    def signal_spec(self):
        """Build the signal; a layout is drawn from the scenario seed."""
        s = self.signal
        t = s.observation_s
        base = WidebandSignalSpec(
            s.bandwidth_hz, t, (), s.noise_power, self.seed,
            tuple(ToneSpec(**tone) for tone in s.tones),
            s.pulse_center_fraction * t,
        )
        if s.layout is not None:
            subbands = random_layout(
                s.bandwidth_hz, s.layout.count, tuple(s.layout.bandwidth_range_hz),
                stream(self.seed, "layout"), guard_hz=s.layout.guard_hz,
            )
        else:
            subbands = tuple(SubbandSpec(**sb) for sb in s.subbands)
        if s.snr_db is not None:
            e = power_for_snr(s.snr_db, base)
            subbands = tuple(SubbandSpec(sb.carrier_hz, sb.bandwidth_hz, e) for sb in subbands)
        return base.replace(subbands=subbands)

    def sampling_plan(self):
        n = int(round(2 * self.signal.bandwidth_hz * self.signal.observation_s))
        t = self.signal.observation_s
        if self.plan.primes is not None:
            return SamplingPlan(n, tuple(self.plan.primes), t)
        return select_primes(n, self.plan.v, self.plan.scale, t)

    def channel_model(self):
        return ChannelModel(self.channel.kind, self.channel.shadow_sigma_db)

    def recovery_config(self, sparsity=None):
        r = self.recovery
        k = sparsity if sparsity is not None else r.sparsity
        return SparseRecoveryConfig(int(k), r.max_iterations, r.residual_tolerance)

"""Multi-rate asynchronous sub-Nyquist sampling for wideband spectrum sensing."""

from .coherence import (
    CoherenceReport,
    mutual_coherence,
    overlap_probability_closed_form,
    overlap_probability_monte_carlo,
    prop2_success_bound,
)
from .detection import BandSpec, band_energy, calibrate_threshold, decide, roc_points
from .recovery import RecoveredSpectrum, SparseRecoveryConfig, cosamp
from .sampler import (
    AliasMatrix,
    PlanError,
    SamplingPlan,
    build_alias_matrix,
    select_primes,
    stack_measurements,
)
from .scenario import ConfigError, Scenario
from .signal_model import (
    ChannelModel,
    SignalSpecError,
    SubbandSpec,
    ToneSpec,
    WidebandSignalSpec,
    sample_branch,
)

__version__ = "0.1.0"

__all__ = [
    "AliasMatrix",
    "BandSpec",
    "ChannelModel",
    "CoherenceReport",
    "ConfigError",
    "PlanError",
    "RecoveredSpectrum",
    "SamplingPlan",
    "Scenario",
    "SignalSpecError",
    "SparseRecoveryConfig",
    "SubbandSpec",
    "ToneSpec",
    "WidebandSignalSpec",
    "band_energy",
    "build_alias_matrix",
    "calibrate_threshold",
    "cosamp",
    "decide",
    "mutual_coherence",
    "overlap_probability_closed_form",
    "overlap_probability_monte_carlo",
    "prop2_success_bound",
    "roc_points",
    "sample_branch",
    "select_primes",
    "stack_measurements",
]

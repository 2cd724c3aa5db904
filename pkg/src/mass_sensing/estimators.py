"""scikit-learn wrappers around recovery and energy detection.

Rows of ``X`` are trials. :class:`SpectrumRecovery` maps stacked branch
magnitudes (``(N/M_i)|Y_i|`` concatenated in plan order) to recovered
spectra, :class:`BandEnergy` reduces spectra to band energies and
:class:`EnergyDetector` thresholds one energy per row. They chain in a
``Pipeline``.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .detection import BandSpec, band_energy, calibrate_threshold
from .recovery import SparseRecoveryConfig, cosamp
from .sampler import SamplingPlan, branch_dft, plan_system, select_primes, stack_measurements


class SpectrumRecovery(BaseEstimator, TransformerMixin):
    """CoSaMP recovery of ``|X|`` for each row of stacked measurements.

    Give either ``primes`` or ``v`` (with ``scale``) for the plan.
    ``fit`` only builds the plan; it learns nothing from the data.
    """

    def __init__(self, nyquist_n=1000, primes=None, v=2, scale=1.0, sparsity=1,
                 max_iterations=50, residual_tolerance=1e-6, observation_s=1.0):
        self.nyquist_n = nyquist_n
        self.primes = primes
        self.v = v
        self.scale = scale
        self.sparsity = sparsity
        self.max_iterations = max_iterations
        self.residual_tolerance = residual_tolerance
        self.observation_s = observation_s

    def _make_plan(self):
        if self.primes is not None:
            return SamplingPlan(self.nyquist_n, tuple(self.primes), self.observation_s)
        return select_primes(self.nyquist_n, self.v, self.scale, self.observation_s)

    def fit(self, X=None, y=None):
        self.plan_ = self._make_plan()
        self.config_ = SparseRecoveryConfig(self.sparsity, self.max_iterations,
                                            self.residual_tolerance)
        if X is not None:
            self._check(X)
        self.n_features_in_ = self.plan_.total_samples
        return self

    def _check(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.plan_.total_samples:
            raise ValueError(f"expected {self.plan_.total_samples} stacked measurements per row, "
                             f"got {X.shape[1]}")
        return X

    def stack(self, branch_samples):
        """Stacked measurement row for one trial's list of branch sample vectors."""
        check_is_fitted(self, "plan_")
        return stack_measurements(self.plan_, [branch_dft(s) for s in branch_samples]).y

    def recover(self, X):
        """Full :class:`RecoveredSpectrum` objects, one per row."""
        check_is_fitted(self, "plan_")
        X = self._check(X)
        base = plan_system(self.plan_)
        return [cosamp(base.with_y(row), self.config_, self.observation_s) for row in X]

    def transform(self, X):
        return np.vstack([r.magnitude for r in self.recover(X)])


class BandEnergy(BaseEstimator, TransformerMixin):
    """Energy of each row of spectra in every band of ``bands`` (list of ``(low, high)`` Hz)."""

    def __init__(self, bands=((0.0, 1.0),), mirror=True, observation_s=1.0):
        self.bands = bands
        self.mirror = mirror
        self.observation_s = observation_s

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.band_specs_ = [BandSpec(lo, hi, self.mirror) for lo, hi in self.bands]
        for b in self.band_specs_:
            b.columns(X.shape[1], self.observation_s)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "band_specs_")
        X = check_array(X, dtype=np.float64)
        return np.array([[band_energy(row, b, self.observation_s) for b in self.band_specs_]
                         for row in X])


class EnergyDetector(BaseEstimator, ClassifierMixin):
    """Threshold detector on the first column of ``X``.

    ``fit`` calibrates the threshold at ``target_pfa`` from noise-only rows:
    the rows labelled 0 when ``y`` is given, otherwise all rows. Predictions
    are 1 (occupied) when the energy strictly exceeds the threshold.
    """

    def __init__(self, target_pfa=0.1):
        self.target_pfa = target_pfa

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        e = X[:, 0]
        if y is not None:
            y = np.asarray(y)
            if y.shape != e.shape:
                raise ValueError("y must hold one label per row")
            e = e[y == 0]
        self.threshold_ = calibrate_threshold(e, self.target_pfa)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "threshold_")
        X = check_array(X, dtype=np.float64)
        return X[:, 0] - self.threshold_

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)

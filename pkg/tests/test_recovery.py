import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mass_sensing.coherence import exactly_recovered, random_sparse_magnitude
from mass_sensing.recovery import (
    RecoveredSpectrum,
    SparseRecoveryConfig,
    cosamp,
    estimate_sparsity,
    recovery_mse,
)
from mass_sensing.rng import stream
from mass_sensing.sampler import SamplingPlan, branch_dft, plan_system, stack_measurements
from mass_sensing.signal_model import (
    BranchOffset,
    ToneSpec,
    WidebandSignalSpec,
    nyquist_reference_spectrum,
    sample_branch,
)

PLAN_210 = SamplingPlan(210, (17, 19, 23, 29, 31))


def test_zero_measurements():
    rec = cosamp(plan_system(PLAN_210), SparseRecoveryConfig(3))
    assert rec.support == ()
    assert rec.residual_norm == 0.0
    np.testing.assert_array_equal(rec.magnitude, np.zeros(210))


def test_noiseless_tone_k2_exact():
    # one cosine occupies the two bins +-b
    spec = WidebandSignalSpec(105.0, 1.0, noise_power=0.0, tones=(ToneSpec(41, 2.0),))
    rng = stream(0, "noise")
    branches = [
        branch_dft(sample_branch(spec, [], r, BranchOffset(0.13 * i), m, rng))
        for i, (m, r) in enumerate(zip(PLAN_210.branch_lengths, PLAN_210.rates_hz))
    ]
    truth = nyquist_reference_spectrum(spec, [])
    rec = cosamp(stack_measurements(PLAN_210, branches), SparseRecoveryConfig(2))
    assert set(rec.support) == set(np.flatnonzero(truth > 1e-9).tolist())
    assert np.linalg.norm(rec.magnitude - truth) < 1e-6 * np.linalg.norm(truth)
    assert exactly_recovered(rec, np.where(truth > 1e-9, truth, 0.0))


def test_single_branch_cannot_split_a_collision():
    plan = SamplingPlan(30, (7,))
    x = np.zeros(30)
    x[[3, 10]] = [1.0, 2.0]  # 7 apart: same row
    sys_ = plan_system(plan)
    rec = cosamp(sys_.with_y(sys_.apply(x)), SparseRecoveryConfig(2))
    assert not exactly_recovered(rec, x)


def test_sparsity_must_fit_measurements():
    sys_ = plan_system(SamplingPlan(15, (5,)))
    with pytest.raises(ValueError):
        cosamp(sys_, SparseRecoveryConfig(6))


@pytest.mark.parametrize("kw", [dict(sparsity=0), dict(sparsity=1, max_iterations=0),
                                dict(sparsity=1, residual_tolerance=-1)])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        SparseRecoveryConfig(**kw)


def test_mse_examples():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    assert recovery_mse(t, t) == 0.0
    e = np.zeros(4)
    e[2] = 3.0
    assert recovery_mse(e, np.zeros(4)) == pytest.approx(9.0 / 4)
    with pytest.raises(ValueError):
        recovery_mse(np.zeros(3), np.zeros(4))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 300))
def test_mse_matches_loop(seed, n):
    rng = stream(seed, "instance")
    a, b = rng.normal(size=n), rng.normal(size=n)
    total = 0.0
    for i in range(n):
        total += (a[i] - b[i]) ** 2
    rec = RecoveredSpectrum(a, (), 0.0)
    assert recovery_mse(rec, b) == pytest.approx(total / n, rel=1e-12, abs=1e-15)


def _noisy_system(seed, k, plan=PLAN_210, noise=0.3):
    rng = stream(seed, "instance")
    x = random_sparse_magnitude(plan.nyquist_n, k, rng)
    sys_ = plan_system(plan)
    y = sys_.apply(x) + noise * np.abs(rng.normal(size=plan.total_samples))
    return sys_.with_y(y)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
def test_residual_never_increases(seed, k):
    rec = cosamp(_noisy_system(seed, k), SparseRecoveryConfig(k))
    h = np.array(rec.residual_history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert rec.residual_norm == pytest.approx(h[-1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
def test_support_size_and_nonnegativity(seed, k):
    rec = cosamp(_noisy_system(seed, k), SparseRecoveryConfig(k))
    assert len(rec.support) <= k
    assert np.all(rec.magnitude >= 0)
    assert np.count_nonzero(rec.magnitude) == len(rec.support)
    np.testing.assert_array_equal(rec.magnitude, np.clip(rec.pre_clip, 0, None))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6),
       c=st.sampled_from([0.5, 2.0, 4.0, 1024.0, 1 / 64]))
def test_scale_equivariance(seed, k, c):
    # powers of two keep the floating-point path exact
    sys_ = _noisy_system(seed, k)
    a = cosamp(sys_, SparseRecoveryConfig(k))
    b = cosamp(sys_.with_y(c * sys_.y), SparseRecoveryConfig(k))
    assert a.support == b.support
    np.testing.assert_allclose(b.magnitude, c * a.magnitude, rtol=1e-9, atol=1e-12)


def test_ties_prefer_lower_bins():
    plan = SamplingPlan(30, (7, 11))
    sys_ = plan_system(plan)
    # a flat measurement makes every column's proxy equal
    rec = cosamp(sys_.with_y(np.ones(18)), SparseRecoveryConfig(1, max_iterations=1))
    assert rec.support == (0,)


def test_regularization_flagged_on_rank_deficiency():
    plan = SamplingPlan(40, (7,))
    sys_ = plan_system(plan)
    x = np.zeros(40)
    x[[1, 8, 15]] = 1.0
    rec = cosamp(sys_.with_y(sys_.apply(x)), SparseRecoveryConfig(3))
    assert rec.regularized


def test_exact_recovery_regime_small():
    plan = SamplingPlan(210, (17, 19, 23, 29, 31, 37))
    base = plan_system(plan)
    rng = stream(2, "instance")
    for _ in range(50):
        x = random_sparse_magnitude(210, 3, rng)
        rec = cosamp(base.with_y(base.apply(x)), SparseRecoveryConfig(3))
        assert exactly_recovered(rec, x)


def test_spectrum_csv(tmp_path):
    mag = np.array([0.0, 1.5, 0.0, 2.0])
    rec = RecoveredSpectrum(mag, (1, 3), 0.0, observation_s=0.5)
    path = tmp_path / "s.csv"
    rec.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin", "frequency_hz", "magnitude"]
    assert [int(r[0]) for r in rows[1:]] == [-2, -1, 0, 1]
    assert [float(r[1]) for r in rows[1:]] == [-4.0, -2.0, 0.0, 2.0]
    assert [float(r[2]) for r in rows[1:]] == mag.tolist()


def test_estimate_sparsity_finds_elbow():
    plan = SamplingPlan(210, (17, 19, 23, 29, 31, 37, 41, 43))
    rng = stream(5, "instance")
    x = random_sparse_magnitude(210, 4, rng, low=5.0, high=6.0)
    sys_ = plan_system(plan)
    assert estimate_sparsity(sys_.with_y(sys_.apply(x)), 12) == 4

import csv
import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import primerange

from mass_sensing.rng import stream
from mass_sensing.sampler import (
    PlanError,
    SamplingPlan,
    alias_row,
    branch_dft,
    build_alias_matrix,
    centered_bins,
    collides,
    plan_system,
    select_primes,
    stack_measurements,
)
from mass_sensing.signal_model import (
    BranchOffset,
    ToneSpec,
    WidebandSignalSpec,
    nyquist_reference_spectrum,
    sample_branch,
)


def centered_row(bin_index, m):
    return int(alias_row(bin_index, m)) - m // 2


# -- prime selection ---------------------------------------------------------------

@pytest.mark.parametrize("n, v, scale, expected", [
    (100, 3, 1.0, (11, 13, 17)),
    (15, 2, 1.2, (5, 7)),
    (10**4, 2, 1.0, (101, 103)),
])
def test_select_primes_table(n, v, scale, expected):
    plan = select_primes(n, v, scale)
    assert plan.branch_lengths == expected
    assert all(a * b > n for a, b in combinations(expected, 2))


def test_select_primes_starts_at_or_above_target():
    plan = select_primes(8192, 22, 2.0)
    assert plan.branch_lengths[0] >= 2 * math.sqrt(8192)
    assert plan.v == 22
    assert list(plan.branch_lengths) == sorted(set(plan.branch_lengths))


@pytest.mark.parametrize("lengths, msg", [
    ((5, 5), "distinct"),
    ((6, 7), "not prime"),
    ((3, 5), r"\(3, 5\)"),
    ((5, 17), "not below"),
])
def test_invalid_plans_named(lengths, msg):
    with pytest.raises(PlanError, match=msg):
        SamplingPlan(15, lengths)


def test_pair_condition_violation_from_selection():
    # scale below 1 is refused; a tight N makes the first pair fail instead
    with pytest.raises(PlanError):
        select_primes(100, 2, 0.5)
    with pytest.raises(PlanError, match="violates"):
        SamplingPlan(35, (5, 7))


def test_plan_ratios_and_dict_round_trip():
    plan = SamplingPlan(100, (11, 13, 17), 2e-6)
    assert plan.total_samples == 41
    assert plan.sum_ratio == pytest.approx(0.41)
    assert plan.mean_ratio == pytest.approx(41 / 300)
    assert plan.rates_hz[0] == pytest.approx(11 / 2e-6)
    assert SamplingPlan.from_dict(plan.to_dict()) == plan


# -- aliasing --------------------------------------------------------------------

@pytest.mark.parametrize("bin_, row", [(6, 1), (0, 0), (-7, -2)])
def test_alias_row_examples(bin_, row):
    assert centered_row(bin_, 5) == row


def test_alias_row_brute_force_small():
    # row of bin n' is the centered residue r with M | (n' - r)
    for m in (3, 5, 7, 11):
        for n in range(m + 1, 61):
            for b in centered_bins(n):
                rows = [r for r in centered_bins(m) if (b - r) % m == 0]
                assert rows == [centered_row(b, m)]


def test_collision_predicate_exhaustive():
    for n in range(2, 61):
        bins = centered_bins(n)
        for m in range(2, n):
            a = build_alias_matrix(m, n)
            rows = a.column_to_row
            for i, j in combinations(range(n), 2):
                same = rows[i] == rows[j]
                assert same == collides(bins[i], bins[j], m) == ((bins[i] - bins[j]) % m == 0)


def test_pairwise_prime_uniqueness_exhaustive():
    for n in range(4, 201):
        primes = list(primerange(2, n))
        for p, q in combinations(primes, 2):
            if p * q <= n:
                continue
            a, b = build_alias_matrix(p, n).column_to_row, build_alias_matrix(q, n).column_to_row
            # two columns collide in both branches iff their (row_p, row_q) pairs coincide
            assert np.unique(a * q + b).size == n, (n, p, q)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 400), data=st.data())
def test_alias_matrix_sums(n, data):
    m = data.draw(st.integers(2, n - 1))
    a = build_alias_matrix(m, n)
    d = a.dense()
    assert d.shape == (m, n)
    assert set(np.unique(d)) <= {0, 1}
    np.testing.assert_array_equal(d.sum(axis=0), np.ones(n))
    assert d.sum(axis=1).max() <= -(-n // m)
    np.testing.assert_array_equal(a.row_counts(), d.sum(axis=1))


def test_alias_apply_and_adjoint_match_dense():
    a = build_alias_matrix(7, 30)
    rng = stream(0, "instance")
    x, r = rng.normal(size=30), rng.normal(size=7)
    np.testing.assert_allclose(a.apply(x), a.dense() @ x)
    np.testing.assert_allclose(a.adjoint(r), a.dense().T @ r)


def test_alias_csv_export(tmp_path):
    a = build_alias_matrix(5, 15)
    path = tmp_path / "alias.csv"
    a.to_csv(path)
    with open(path) as fh:
        rows = [[int(v) for v in r] for r in csv.reader(fh)]
    np.testing.assert_array_equal(rows, a.dense())


def test_alias_matrix_bounds():
    with pytest.raises(PlanError):
        build_alias_matrix(15, 15)


# -- branch DFT ----------------------------------------------------------------

def test_branch_dft_zero():
    b = branch_dft(np.zeros(5))
    assert b.length == 5
    np.testing.assert_array_equal(b.magnitude, np.zeros(5))
    np.testing.assert_array_equal(b.dft, np.zeros(5))


def test_branch_dft_constant():
    b = branch_dft(np.ones(5))
    expected = np.zeros(5)
    expected[5 // 2] = 5
    np.testing.assert_allclose(b.magnitude, expected, atol=1e-12)


def test_branch_dft_on_bin_cosine():
    m = np.arange(5)
    b = branch_dft(np.cos(2 * np.pi * 2 * m / 5))
    mag = dict(zip(centered_bins(5), b.magnitude))
    assert mag[2] == pytest.approx(2.5)
    assert mag[-2] == pytest.approx(2.5)
    assert all(abs(mag[k]) < 1e-12 for k in (-1, 0, 1))


def test_branch_dft_rejects_empty():
    with pytest.raises(ValueError):
        branch_dft([])


# -- stacking ------------------------------------------------------------------

def test_single_zero_branch_stacks_to_zero():
    plan = SamplingPlan(15, (5,))
    sys_ = stack_measurements(plan, [branch_dft(np.zeros(5))])
    np.testing.assert_array_equal(sys_.y, np.zeros(5))


def test_stack_shape():
    plan = SamplingPlan(15, (5, 7))
    sys_ = stack_measurements(plan, [branch_dft(np.zeros(5)), branch_dft(np.zeros(7))])
    assert sys_.y.shape == (12,)
    assert [a.rows for a in sys_.phi] == [5, 7]
    assert sys_.dense().shape == (12, 15)
    np.testing.assert_array_equal(sys_.offsets, [0, 5, 12])


def test_stack_rejects_mismatched_branches():
    plan = SamplingPlan(15, (5, 7))
    with pytest.raises(ValueError):
        stack_measurements(plan, [branch_dft(np.zeros(7)), branch_dft(np.zeros(5))])
    with pytest.raises(ValueError):
        stack_measurements(plan, [branch_dft(np.zeros(5))])


def _tone_branches(plan, tones, deltas=None, t=1.0):
    spec = WidebandSignalSpec(plan.nyquist_n / (2 * t), t, noise_power=0.0, tones=tones)
    deltas = deltas or [0.0] * plan.v
    rng = stream(0, "noise")
    branches = [
        branch_dft(sample_branch(spec, [], r, BranchOffset(d), m, rng))
        for m, r, d in zip(plan.branch_lengths, plan.rates_hz, deltas)
    ]
    return spec, branches


def test_single_tone_obeys_stacked_model():
    plan = SamplingPlan(210, (17, 19, 23, 29, 31))
    spec, branches = _tone_branches(plan, (ToneSpec(37, 1.0),))
    sys_ = stack_measurements(plan, branches)
    truth = nyquist_reference_spectrum(spec, [])
    np.testing.assert_allclose(sys_.y, sys_.apply(truth), rtol=1e-9, atol=1e-9 * sys_.y.max())


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_aliasing_identity_for_noncolliding_supports(data):
    plan = SamplingPlan(210, (17, 19, 23, 29, 31))
    bins = data.draw(st.lists(st.integers(1, 104), min_size=1, max_size=3, unique=True))
    # the support is {+-b}; require no pair to share a row in any branch
    support = sorted({b for b in bins} | {-b for b in bins})
    for m in plan.branch_lengths:
        rows = [centered_row(b, m) for b in support]
        if len(set(rows)) < len(rows):
            return
    amps = data.draw(st.lists(st.floats(0.1, 5.0), min_size=len(bins), max_size=len(bins)))
    deltas = data.draw(st.lists(st.floats(0.0, 0.5), min_size=plan.v, max_size=plan.v))
    tones = tuple(ToneSpec(b, a) for b, a in zip(bins, amps))
    spec, branches = _tone_branches(plan, tones, deltas)
    sys_ = stack_measurements(plan, branches)
    truth = nyquist_reference_spectrum(spec, [])
    want = sys_.apply(truth)
    assert np.linalg.norm(sys_.y - want) <= 1e-8 * np.linalg.norm(want)


def test_stacked_operators_match_dense():
    plan = SamplingPlan(100, (11, 13, 17))
    sys_ = plan_system(plan)
    dense = sys_.dense()
    rng = stream(1, "instance")
    x, r = rng.normal(size=100), rng.normal(size=41)
    np.testing.assert_allclose(sys_.apply(x), dense @ x)
    np.testing.assert_allclose(sys_.adjoint(r), dense.T @ r)
    cols = np.array([3, 50, 99])
    np.testing.assert_allclose(sys_.apply_sparse(cols, [1.0, 2.0, 3.0]), dense[:, cols] @ [1, 2, 3])
    np.testing.assert_array_equal(sys_.segment(1), sys_.y[11:24])
    with pytest.raises(ValueError):
        sys_.with_y(np.zeros(3))

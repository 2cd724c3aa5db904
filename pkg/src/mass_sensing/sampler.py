"""Prime branch lengths, branch DFTs and the binary aliasing operator.

Bins are *centered*: a length-``L`` spectrum covers ``-L//2 .. ceil(L/2)-1``,
which is exactly ``np.fft.fftshift`` order. Position ``p`` of a centered
array holds bin ``p - L//2``.
"""

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from sympy import isprime, nextprime


class PlanError(ValueError):
    pass


def centered_bins(length):
    """Bin index held at each position of a centered (fftshifted) spectrum."""
    return np.arange(length) - length // 2


def alias_row(bin_index, m):
    """Position in a centered length-``m`` spectrum that centered bin ``bin_index`` folds onto."""
    return (np.asarray(bin_index) + m // 2) % m


def collides(n1, n2, m):
    """True when centered bins ``n1`` and ``n2`` fold onto the same branch bin."""
    return (n1 - n2) % m == 0


@dataclass(frozen=True)
class SamplingPlan:
    """Branch lengths ``M_1..M_v`` for an ``N``-bin Nyquist reference over ``T`` seconds."""

    nyquist_n: int
    branch_lengths: tuple
    observation_s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branch_lengths", tuple(int(m) for m in self.branch_lengths))
        n, ms = self.nyquist_n, self.branch_lengths
        if not ms:
            raise PlanError("a plan needs at least one branch")
        if len(set(ms)) != len(ms):
            raise PlanError(f"branch lengths must be distinct, got {ms}")
        for m in ms:
            if not isprime(m):
                raise PlanError(f"branch length {m} is not prime")
            if m >= n:
                raise PlanError(f"branch length {m} is not below N = {n}")
        for a, b in combinations(ms, 2):
            if a * b <= n:
                raise PlanError(
                    f"branch pair ({a}, {b}) violates M_l*M_z > N: {a}*{b} = {a * b} <= {n}"
                )

    @property
    def v(self):
        return len(self.branch_lengths)

    @property
    def rates_hz(self):
        return tuple(m / self.observation_s for m in self.branch_lengths)

    @property
    def total_samples(self):
        return sum(self.branch_lengths)

    @property
    def sum_ratio(self):
        return self.total_samples / self.nyquist_n

    @property
    def mean_ratio(self):
        return self.total_samples / (self.v * self.nyquist_n)

    def to_dict(self):
        return {
            "nyquist_n": self.nyquist_n,
            "observation_s": self.observation_s,
            "primes": list(self.branch_lengths),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["nyquist_n"]), tuple(d["primes"]), float(d.get("observation_s", 1.0)))


def select_primes(nyquist_n, v, scale=1.0, observation_s=1.0):
    """First prime ``>= scale*sqrt(N)`` and the ``v-1`` primes that follow it.

    Raises :class:`PlanError` when the resulting set is not a valid plan,
    e.g. when a pair multiplies to at most ``N``.
    """
    if v < 1:
        raise PlanError("v must be >= 1")
    if scale < 1:
        raise PlanError("scale must be >= 1")
    start = scale * math.sqrt(nyquist_n)
    if start < 2:
        raise PlanError("scale*sqrt(N) must be at least 2")
    primes = [int(nextprime(math.ceil(start) - 1))]
    while len(primes) < v:
        primes.append(int(nextprime(primes[-1])))
    return SamplingPlan(nyquist_n, tuple(primes), observation_s)


@dataclass(frozen=True, eq=False)
class AliasMatrix:
    """Binary ``M x N`` aliasing operator stored as its column -> row map."""

    rows: int
    cols: int
    column_to_row: np.ndarray

    def dense(self):
        out = np.zeros((self.rows, self.cols), dtype=np.int8)
        out[self.column_to_row, np.arange(self.cols)] = 1
        return out

    def apply(self, x):
        return np.bincount(self.column_to_row, weights=x, minlength=self.rows)

    def adjoint(self, r):
        return np.asarray(r)[self.column_to_row]

    def row_counts(self):
        return np.bincount(self.column_to_row, minlength=self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.dense().tolist())


def build_alias_matrix(m, n):
    if not 1 < m < n:
        raise PlanError(f"need 1 < M < N, got M={m}, N={n}")
    return AliasMatrix(m, n, alias_row(centered_bins(n), m))


@dataclass(frozen=True, eq=False)
class BranchMeasurement:
    length: int
    dft: np.ndarray
    magnitude: np.ndarray


def branch_dft(samples):
    """Unnormalized DFT of one branch, in centered bin order."""
    samples = np.asarray(samples)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("branch samples must be a nonempty 1-d vector")
    dft = np.fft.fftshift(np.fft.fft(samples))
    return BranchMeasurement(samples.size, dft, np.abs(dft))


class StackedSystem:
    """Stacked measurements ``y`` and the block aliasing operator ``Phi``.

    ``row_index[i, c]`` is the global row of ``y`` hit by column ``c`` in
    block ``i``; all products with ``Phi`` go through this table.
    """

    def __init__(self, y, phi):
        self.phi = tuple(phi)
        self.y = np.asarray(y, dtype=float)
        sizes = [a.rows for a in self.phi]
        if self.y.shape != (sum(sizes),):
            raise ValueError(f"y has shape {self.y.shape}, expected ({sum(sizes)},)")
        if len({a.cols for a in self.phi}) != 1:
            raise ValueError("alias blocks disagree on N")
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.row_index = np.stack(
            [a.column_to_row + off for a, off in zip(self.phi, self.offsets[:-1])]
        )

    @property
    def n(self):
        return self.phi[0].cols

    @property
    def v(self):
        return len(self.phi)

    @property
    def n_rows(self):
        return int(self.offsets[-1])

    def segment(self, i):
        return self.y[self.offsets[i]:self.offsets[i + 1]]

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return np.bincount(self.row_index.ravel(), weights=np.tile(x, self.v),
                           minlength=self.n_rows)

    def apply_sparse(self, cols, values):
        rows = self.row_index[:, cols]
        return np.bincount(rows.ravel(), weights=np.tile(values, self.v), minlength=self.n_rows)

    def adjoint(self, r):
        return np.asarray(r)[self.row_index].sum(axis=0)

    def dense(self):
        return np.vstack([a.dense() for a in self.phi])

    def with_y(self, y):
        out = object.__new__(StackedSystem)
        out.__dict__.update(self.__dict__)
        out.y = np.asarray(y, dtype=float)
        if out.y.shape != self.y.shape:
            raise ValueError("replacement y has the wrong shape")
        return out


@lru_cache(maxsize=64)
def _alias_blocks(n, lengths):
    return tuple(build_alias_matrix(m, n) for m in lengths)


def plan_system(plan, y=None):
    """Stacked system for ``plan`` with measurements ``y`` (zeros when omitted)."""
    phi = _alias_blocks(plan.nyquist_n, plan.branch_lengths)
    if y is None:
        y = np.zeros(plan.total_samples)
    return StackedSystem(y, phi)


def stack_measurements(plan, branches):
    """Concatenate ``(N/M_i)*|Y_i|`` over branches in plan order."""
    if len(branches) != plan.v:
        raise ValueError(f"plan has {plan.v} branches, got {len(branches)} measurements")
    for m, b in zip(plan.branch_lengths, branches):
        if b.length != m or b.magnitude.shape != (m,):
            raise ValueError(f"measurement of length {b.length} does not match branch M={m}")
    n = plan.nyquist_n
    y = np.concatenate([(n / b.length) * b.magnitude for b in branches])
    return plan_system(plan, y)

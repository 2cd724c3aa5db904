"""Coherence of the stacked aliasing operator and recovery-probability checks."""

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .recovery import SparseRecoveryConfig, cosamp
from .sampler import SamplingPlan, build_alias_matrix, plan_system

DENSE_CAP = 5000


class CoherenceCapError(ValueError):
    pass


@dataclass(frozen=True)
class CoherenceReport:
    mu: float
    predicted_mu: float
    max_pair: tuple
    max_collisions: int
    v: int
    undersampling_factors: tuple
    omega_probabilities: tuple

    @property
    def mu_exact(self):
        return Fraction(self.max_collisions, self.v)

    @property
    def matches_prediction(self):
        return self.mu_exact == Fraction(1, self.v)


def _as_system(phi):
    if isinstance(phi, SamplingPlan):
        return plan_system(phi)
    return phi


def omega_probability(n, m):
    """Chance that two random distinct bins share a row in a length-``m`` branch."""
    return (n - m) / (m * (n - 1))


def _dense_max_collisions(system, block=1024):
    dense = system.dense().astype(np.float64)
    cols = dense / np.linalg.norm(dense, axis=0)
    n = system.n
    best, pair = -1.0, (0, 1)
    for lo in range(0, n, block):
        g = np.abs(cols[:, lo:lo + block].T @ cols)
        idx = np.arange(lo, min(lo + block, n))
        g[idx - lo, idx] = -1.0
        flat = int(np.argmax(g))
        i, j = divmod(flat, n)
        if g[i, j] > best + 1e-12:
            best, pair = float(g[i, j]), (lo + i, j)
    return int(round(best * system.v)), tuple(sorted(pair))


def _collision_max(system):
    # columns c and c+d collide in block i exactly when M_i divides d
    n = system.n
    d = np.arange(1, n)
    counts = np.zeros(n - 1, dtype=int)
    for a in system.phi:
        counts += d % a.rows == 0
    j = int(np.argmax(counts))
    return int(counts[j]), (0, int(d[j]))


def mutual_coherence(phi, method="auto", cap=DENSE_CAP):
    """Largest normalized inner product between distinct columns of ``Phi``.

    ``method="dense"`` forms every normalized column inner product and is
    refused above ``cap`` columns. ``method="collision"`` uses the 0/1
    structure: every column holds ``v`` ones, two columns share a row in
    block ``i`` iff ``M_i`` divides their distance, so the inner product is
    a collision count over ``v``. ``"auto"`` picks dense up to the cap.
    """
    system = _as_system(phi)
    n = system.n
    if method == "auto":
        method = "dense" if n <= cap else "collision"
    if method == "dense":
        if n > cap:
            raise CoherenceCapError(f"N = {n} exceeds the dense coherence cap {cap}")
        hits, pair = _dense_max_collisions(system)
    elif method == "collision":
        hits, pair = _collision_max(system)
    else:
        raise ValueError(f"unknown method {method!r}")
    ms = [a.rows for a in system.phi]
    return CoherenceReport(
        mu=hits / system.v,
        predicted_mu=1 / system.v,
        max_pair=pair,
        max_collisions=hits,
        v=system.v,
        undersampling_factors=tuple(n / m for m in ms),
        omega_probabilities=tuple(omega_probability(n, m) for m in ms),
    )


def prop2_success_bound(k, plan):
    """Lower bound ``1 - (2k-1)/v * sum(1/M_i)`` on the recovery probability, floored at 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ms = plan.branch_lengths if isinstance(plan, SamplingPlan) else tuple(plan)
    bound = 1 - Fraction(2 * k - 1, len(ms)) * sum(Fraction(1, m) for m in ms)
    return float(max(bound, Fraction(0)))


def overlap_probability_closed_form(k, n, m):
    """Probability that at most one occupied bin folds onto a given branch row.

    Each of the ``ceil(N/M)`` bins feeding the row is occupied independently
    with probability ``k/N``.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= N")
    if not 0 < m < n:
        raise ValueError("need 0 < M < N")
    c = -(-n // m)
    p = k / n
    return (1 - p) ** c + c * p * (1 - p) ** (c - 1)


def overlap_probability_sqrt_form(k, n):
    """Same probability for ``M = sqrt(N)`` exactly, in its factored form."""
    r = math.sqrt(n)
    return ((n - k) / n) ** r * (n - k + k * r) / (n - k)


def overlap_probability_monte_carlo(k, n, m, trials, rng, chunk=20000):
    """Empirical ``Pr(q < 2)`` for the fullest row of a length-``m`` branch.

    Only the bins that fold onto the chosen row are simulated; the rest
    cannot change its occupant count. Returns ``(estimate, half_width)``
    where ``half_width`` is three binomial standard errors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    col_to_row = build_alias_matrix(m, n).column_to_row
    row = int(np.argmax(np.bincount(col_to_row, minlength=m)))
    members = int(np.sum(col_to_row == row))
    p = k / n
    hits = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        occupied = (rng.random((size, members)) < p).sum(axis=1)
        hits += int(np.sum(occupied < 2))
        done += size
    est = hits / trials
    return est, 3 * math.sqrt(est * (1 - est) / trials)


def random_sparse_magnitude(n, k, rng, low=1.0, high=2.0):
    """``k`` distinct random bins with magnitudes uniform on ``[low, high]``."""
    x = np.zeros(n)
    if k:
        x[rng.choice(n, size=k, replace=False)] = rng.uniform(low, high, size=k)
    return x


def exactly_recovered(estimate, truth, rel_tol=1e-6):
    true_support = set(np.flatnonzero(truth).tolist())
    if set(estimate.support) != true_support:
        return False
    scale = np.linalg.norm(truth)
    if scale == 0:
        return bool(np.linalg.norm(estimate.magnitude) == 0)
    return bool(np.linalg.norm(estimate.magnitude - truth) / scale < rel_tol)


def empirical_recovery_probability(k, plan, trials, rng, config=None):
    """Fraction of random noiseless ``k``-sparse magnitudes that CoSaMP recovers exactly.

    Instances are drawn directly in the magnitude domain and measured
    through the stacked operator, ``y = Phi |X|``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if k == 0:
        return 1.0
    base = plan_system(plan)
    config = config or SparseRecoveryConfig(k)
    wins = 0
    for _ in range(trials):
        x = random_sparse_magnitude(plan.nyquist_n, k, rng)
        rec = cosamp(base.with_y(base.apply(x)), config)
        wins += exactly_recovered(rec, x)
    return wins / trials


REPORT_COLUMNS = ["plan_id", "v", "mu", "predicted_mu", "bound", "empirical_rate"]


def coherence_row(plan, plan_id="", k=None, trials=0, rng=None, config=None):
    """One report row; ``bound`` and ``empirical_rate`` are blank without ``k``/``trials``."""
    report = mutual_coherence(plan)
    bound = prop2_success_bound(k, plan) if k else ""
    rate = ""
    if k and trials:
        if rng is None:
            raise ValueError("an empirical rate needs an rng")
        rate = empirical_recovery_probability(k, plan, trials, rng, config)
    return {
        "plan_id": plan_id or "-".join(map(str, plan.branch_lengths)),
        "v": report.v,
        "mu": report.mu,
        "predicted_mu": report.predicted_mu,
        "bound": bound,
        "empirical_rate": rate,
    }


def write_coherence_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

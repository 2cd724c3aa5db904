"""CoSaMP recovery of the spectral magnitude from a stacked aliasing system."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .sampler import centered_bins

RIDGE = 1e-10
# squared Cholesky pivot (relative to v) below which the Gram matrix is treated as singular
PIVOT_FLOOR = 1e-9


@dataclass(frozen=True)
class SparseRecoveryConfig:
    sparsity: int
    max_iterations: int = 50
    residual_tolerance: float = 1e-6

    def __post_init__(self):
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.residual_tolerance < 0:
            raise ValueError("residual_tolerance must be >= 0")


@dataclass(frozen=True, eq=False)
class RecoveredSpectrum:
    """Nonnegative magnitude estimate on centered Nyquist bins.

    ``support`` holds column positions (not centered bin indices) where the
    clipped estimate is nonzero. ``pre_clip`` keeps the signed least-squares
    values before negatives were zeroed.
    """

    magnitude: np.ndarray
    support: tuple
    residual_norm: float
    iterations: int = 0
    regularized: bool = False
    pre_clip: np.ndarray = None
    residual_history: tuple = ()
    observation_s: float = 1.0

    @property
    def n(self):
        return self.magnitude.size

    @property
    def bins(self):
        return centered_bins(self.n)

    @property
    def frequencies_hz(self):
        return self.bins / self.observation_s

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin", "frequency_hz", "magnitude"])
            for b, f, m in zip(self.bins, self.frequencies_hz, self.magnitude):
                w.writerow([int(b), repr(float(f)), repr(float(m))])


def _top(values, count):
    """Indices of the ``count`` largest values, largest first; ties go to the lower index."""
    n = values.size
    if count >= n:
        return np.argsort(-values, kind="stable")
    cut = np.partition(values, n - count)[n - count]
    above = np.flatnonzero(values > cut)
    ties = np.flatnonzero(values == cut)[:count - above.size]
    idx = np.concatenate([above, ties])
    return idx[np.lexsort((idx, -values[idx]))]


def _restricted_lstsq(system, cols):
    """Least squares on the columns ``cols`` via the normal equations.

    The Gram matrix of the selected 0/1 columns counts shared rows, so it is
    built from the row table without materializing ``Phi``.
    """
    rows = system.row_index[:, cols]
    rhs = system.y[rows].sum(axis=0)
    t = len(cols)
    v = system.v
    onehot = sparse.csc_matrix(
        (np.ones(t * v), rows.T.ravel(), np.arange(0, t * v + 1, v)),
        shape=(system.n_rows, t),
    )
    gram = (onehot.T @ onehot).toarray()
    try:
        chol = linalg.cholesky(gram, lower=True, check_finite=False)
        regularized = np.min(np.diag(chol)) ** 2 < PIVOT_FLOOR * v
    except linalg.LinAlgError:
        regularized = True
    if regularized:
        return np.linalg.solve(gram + RIDGE * np.eye(t), rhs), True
    return linalg.cho_solve((chol, True), rhs, check_finite=False), False


def cosamp(system, config, observation_s=1.0):
    """Recover a ``k``-sparse magnitude vector from ``system.y = Phi |X|``.

    Each iteration correlates the residual with every column, merges the
    ``2k`` strongest columns with the current support, solves least squares
    on the merged set and prunes back to ``k`` terms. Iterations that would
    raise the residual are rejected and end the loop, so the accepted
    residual sequence never increases. The loop also stops once the residual
    drops below ``residual_tolerance * ||y||`` or the support stops changing.
    """
    k = config.sparsity
    n = system.n
    y = system.y
    if k > system.n_rows:
        raise ValueError(f"sparsity {k} exceeds the number of measurements {system.n_rows}")
    y_norm = float(np.linalg.norm(y))
    x = np.zeros(n)
    if y_norm == 0:
        return RecoveredSpectrum(x, (), 0.0, 0, False, x.copy(), (0.0,), observation_s)

    support = np.array([], dtype=int)
    residual = y
    r_norm = y_norm
    history = [r_norm]
    regularized = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        proxy = np.abs(system.adjoint(residual))
        merged = np.union1d(support, _top(proxy, min(2 * k, n)))
        coef, reg = _restricted_lstsq(system, merged)
        keep = np.sort(_top(np.abs(coef), min(k, merged.size)))
        new_support = merged[keep]
        new_vals = coef[keep]
        new_residual = y - system.apply_sparse(new_support, new_vals)
        new_norm = float(np.linalg.norm(new_residual))
        if new_norm > r_norm:
            it -= 1
            break
        regularized |= reg
        stalled = np.array_equal(new_support, support) and new_norm >= r_norm - 1e-12 * y_norm
        support, residual, r_norm = new_support, new_residual, new_norm
        x = np.zeros(n)
        x[support] = new_vals
        history.append(r_norm)
        if r_norm <= config.residual_tolerance * y_norm or stalled:
            break

    magnitude = np.clip(x, 0.0, None)
    eff = tuple(int(i) for i in np.flatnonzero(magnitude))
    return RecoveredSpectrum(magnitude, eff, r_norm, it, regularized, x, tuple(history),
                             observation_s)


def recovery_mse(estimate, truth):
    """Mean squared error between an estimate (spectrum or array) and ``|X|``."""
    est = estimate.magnitude if isinstance(estimate, RecoveredSpectrum) else np.asarray(estimate)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {truth.shape}")
    return float(np.mean((est - truth) ** 2))


def estimate_sparsity(system, k_max, config=None):
    """Pick ``k`` at the elbow of the CoSaMP residual curve over ``k = 1..k_max``.

    Heuristic helper for when the occupancy is unknown; the elbow is the
    point farthest from the chord joining the curve's end points.
    """
    k_max = max(1, min(int(k_max), system.n_rows))
    base = config or SparseRecoveryConfig(1)
    ks = np.arange(1, k_max + 1)
    res = np.array([
        cosamp(system, SparseRecoveryConfig(int(k), base.max_iterations,
                                            base.residual_tolerance)).residual_norm
        for k in ks
    ])
    if k_max < 3 or res[0] == res[-1]:
        return int(ks[np.argmin(res)])
    xs = (ks - ks[0]) / (ks[-1] - ks[0])
    ys = (res - res[-1]) / (res[0] - res[-1])
    dist = np.abs(xs + ys - 1) / np.sqrt(2)
    return int(ks[np.argmax(dist)])

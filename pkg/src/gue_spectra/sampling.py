"""GUE spectrum samplers and empirical counting statistics.

Two equal-in-law sampling routes: the dense Hermitian matrix route and
the O(n^2) symmetric tridiagonal route.  Replicates derive their
generator state from (seed, replicate index), so results are independent
of execution order and thread schedule.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import eigvalsh_tridiagonal

from .fredholm import CountingDistribution, _assemble_distribution
from .kernels import ScaledWindow

__all__ = [
    "EigenSample",
    "CountRecord",
    "ConditionSample",
    "IndependenceSummary",
    "gue_dense_matrix",
    "sample_gue_dense",
    "sample_gue_tridiag",
    "sturm_count",
    "count_in_windows",
    "sample_records",
    "extreme_pairs",
    "condition_statistics",
    "empirical_joint_pmf",
    "semicircle_cdf",
    "ks_statistic",
]

THREADS_ENV = "GUE_SPECTRA_THREADS"


@dataclass(frozen=True)
class EigenSample:
    """One sampled GUE spectrum, sorted ascending."""

    n: int
    eigenvalues: np.ndarray
    seed: int
    route: str

    @property
    def smallest(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def largest(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class CountRecord:
    """Window occupancies and scaled extreme statistics of one sample."""

    counts: tuple[int, ...]
    scaled_min: float      # n^(2/3) (lambda_min + 2)
    scaled_max: float      # n^(2/3) (lambda_max - 2)
    condition: float       # n^(2/3) (lambda_max / lambda_min + 1), nan if min >= 0


@dataclass(frozen=True)
class ConditionSample:
    """Condition-number statistics with the count of excluded replicates."""

    values: np.ndarray
    excluded: int


@dataclass(frozen=True)
class IndependenceSummary:
    """Pearson chi-square independence test over the pooled occupancy table."""

    chi2: float
    dof: int
    pvalue: float
    n_samples: int
    joint_se: np.ndarray = field(repr=False)
    levels: tuple[int, ...] = ()


def _generator(seed: int, index: int | None = None) -> np.random.Generator:
    entropy = seed if index is None else (seed, index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _thread_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def gue_dense_matrix(n: int, seed: int) -> np.ndarray:
    """Hermitian matrix with entry variance 1/n (real diagonal, complex above)."""
    rng = _generator(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / (2.0 * math.sqrt(n))


def sample_gue_dense(n: int, seed: int) -> EigenSample:
    """Spectrum via full Hermitian eigensolve; deterministic in (n, seed)."""
    if n < 1:
        raise ValueError(f"matrix size must be >= 1, got {n}")
    eigenvalues = np.linalg.eigvalsh(gue_dense_matrix(n, seed))
    return EigenSample(n=n, eigenvalues=eigenvalues, seed=seed, route="dense")


def _tridiag_coefficients(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    diag = rng.standard_normal(n) / math.sqrt(n)
    dof = 2.0 * np.arange(n - 1, 0, -1)
    off = np.sqrt(rng.chisquare(dof) / (2.0 * n))
    return diag, off


def sample_gue_tridiag(n: int, seed: int) -> EigenSample:
    """Spectrum via the equal-in-law symmetric tridiagonal model.

    Diagonal entries are Normal(0, 1/n); the k-th off-diagonal entry is
    chi with 2(n-k) degrees of freedom over sqrt(2n).
    """
    if n < 1:
        raise ValueError(f"matrix size must be >= 1, got {n}")
    diag, off = _tridiag_coefficients(n, _generator(seed))
    if n == 1:
        eigenvalues = diag.copy()
    else:
        eigenvalues = eigvalsh_tridiagonal(diag, off)
    return EigenSample(n=n, eigenvalues=np.sort(eigenvalues), seed=seed, route="tridiag")


_SAMPLERS = {"dense": sample_gue_dense, "tridiag": sample_gue_tridiag}


def sturm_count(diag: np.ndarray, off: np.ndarray, shift: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix below shift."""
    count = 0
    q = 1.0
    tiny = np.finfo(float).tiny
    for k in range(len(diag)):
        e2 = off[k - 1] ** 2 if k else 0.0
        q = diag[k] - shift - (e2 / q if abs(q) > tiny else e2 / tiny)
        if q < 0:
            count += 1
    return count


def count_in_windows(sample: EigenSample, windows) -> CountRecord:
    """Occupancy of each realized window, half-open [a, b) per interval."""
    eig = sample.eigenvalues
    n = sample.n
    counts = []
    for w in windows:
        total = 0
        for a, b in w.realized(n):
            total += int(np.searchsorted(eig, b, side="left")
                         - np.searchsorted(eig, a, side="left"))
        counts.append(total)
    scale = n ** (2.0 / 3.0)
    smallest, largest = sample.smallest, sample.largest
    condition = scale * (largest / smallest + 1.0) if smallest < 0 else math.nan
    return CountRecord(
        counts=tuple(counts),
        scaled_min=scale * (smallest + 2.0),
        scaled_max=scale * (largest - 2.0),
        condition=condition,
    )


def sample_records(n: int, reps: int, seed: int, windows=(), route: str = "tridiag") -> list[CountRecord]:
    """reps independent CountRecords; replicate r is seeded from (seed, r)."""
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    sampler = _SAMPLERS[route]
    windows = tuple(windows)

    def one(r: int) -> CountRecord:
        return count_in_windows(sampler(n, _mix_seed(seed, r)), windows)

    workers = _thread_count()
    if workers == 1 or reps < 8:
        return [one(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(reps), chunksize=max(1, reps // (8 * workers))))


def _mix_seed(seed: int, index: int) -> int:
    # Replicate keys are fed to SeedSequence as the pair (seed, index); the
    # sampler signature wants a single integer, so fold deterministically.
    return int(np.random.SeedSequence((seed, index)).generate_state(1, np.uint64)[0])


def extreme_pairs(n: int, reps: int, seed: int, route: str = "tridiag") -> np.ndarray:
    """(reps, 2) array of (n^(2/3)(min + 2), n^(2/3)(max - 2))."""
    records = sample_records(n, reps, seed, (), route)
    return np.array([(rec.scaled_min, rec.scaled_max) for rec in records])


def condition_statistics(n: int, reps: int, seed: int, route: str = "tridiag") -> ConditionSample:
    """Scaled condition-number statistic per replicate.

    Replicates whose smallest eigenvalue is nonnegative (so the statistic
    is not the edge-fluctuation object) are excluded and counted.
    """
    records = sample_records(n, reps, seed, (), route)
    values = np.array([rec.condition for rec in records])
    keep = ~np.isnan(values)
    return ConditionSample(values=values[keep], excluded=int(np.sum(~keep)))


def _margins(table: np.ndarray) -> list[np.ndarray]:
    return [table.sum(axis=tuple(a for a in range(table.ndim) if a != i))
            for i in range(table.ndim)]


def _merge_level(table: np.ndarray, axis: int, level: int, neighbor: int) -> np.ndarray:
    lo, hi = sorted((level, neighbor))
    head = table.take(np.arange(lo), axis=axis)
    pair = table.take([lo, hi], axis=axis).sum(axis=axis, keepdims=True)
    tail = table.take(np.arange(hi + 1, table.shape[axis]), axis=axis)
    return np.concatenate([head, pair, tail], axis=axis)


def _pool_levels(table: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Merge adjacent occupancy levels per axis until expected counts >= 5."""
    total = table.sum()
    while True:
        margins = _margins(table)
        if table.ndim == 1:
            expected = margins[0]
        else:
            expected = total * np.multiply.outer(*[m / total for m in margins])
        if np.min(expected) >= 5.0 or all(s <= 2 for s in table.shape):
            return table, margins
        # merge the lightest mergeable marginal level into its lighter neighbor
        axis, level, smallest = -1, -1, math.inf
        for i, m in enumerate(margins):
            if len(m) <= 2:
                continue
            j = int(np.argmin(m))
            if m[j] < smallest:
                smallest, axis, level = float(m[j]), i, j
        if axis < 0:
            return table, margins
        m = margins[axis]
        if level == 0:
            neighbor = 1
        elif level == len(m) - 1:
            neighbor = level - 1
        else:
            neighbor = level - 1 if m[level - 1] <= m[level + 1] else level + 1
        table = _merge_level(table, axis, level, neighbor)


def empirical_joint_pmf(records, windows, lmax=2) -> tuple[CountingDistribution, IndependenceSummary]:
    """Empirical occupancy distribution plus an independence test.

    Requires at least 1000 records.  The joint table reports occupancies
    up to lmax per window; the chi-square test pools higher occupancies
    into a tail bin and merges sparse levels before computing the Pearson
    statistic against the product of empirical marginals.
    """
    records = list(records)
    if len(records) < 1000:
        raise ValueError(f"need >= 1000 records, got {len(records)}")
    windows = tuple(windows)
    p = len(windows)
    if p == 0:
        raise ValueError("need at least one window")
    lmax_vec = np.broadcast_to(np.asarray(lmax, dtype=int), (p,))
    counts = np.array([rec.counts for rec in records])
    if counts.shape[1] != p:
        raise ValueError("records carry a different window count")
    total = len(records)

    # Tail-pooled contingency table: levels 0..lmax_i then (> lmax_i).
    pooled_shape = tuple(lmax_vec + 2)
    pooled = np.zeros(pooled_shape)
    clipped = np.minimum(counts, lmax_vec + 1)
    np.add.at(pooled, tuple(clipped.T), 1.0)

    table = pooled[tuple(slice(0, l + 1) for l in lmax_vec)]
    joint = table / total
    marginals = []
    for i in range(p):
        hist = np.bincount(counts[:, i], minlength=lmax_vec[i] + 1)[: lmax_vec[i] + 1]
        marginals.append(hist / total)
    dist = _assemble_distribution(
        windows, joint, marginals,
        {"method": "empirical", "reps": total},
    )

    merged, margins = _pool_levels(pooled)
    if p == 1:
        chi2, dof, pvalue = 0.0, 0, math.nan
    else:
        expected = total * np.multiply.outer(*[m / total for m in margins])
        with np.errstate(invalid="ignore", divide="ignore"):
            contrib = np.where(expected > 0, (merged - expected) ** 2 / expected, 0.0)
        chi2 = float(contrib.sum())
        cells = int(np.prod(merged.shape))
        dof = cells - 1 - sum(s - 1 for s in merged.shape)
        pvalue = float(stats.chi2.sf(chi2, dof)) if dof >= 1 else math.nan
    se = np.sqrt(np.clip(joint * (1.0 - joint), 0.0, None) / total)
    summary = IndependenceSummary(
        chi2=chi2, dof=dof, pvalue=pvalue, n_samples=total,
        joint_se=se, levels=tuple(merged.shape),
    )
    return dist, summary


def semicircle_cdf(x) -> np.ndarray:
    """Distribution function of the semicircle law on (-2, 2)."""
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    out = 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * math.pi) + np.arcsin(x / 2.0) / math.pi
    return float(out) if out.ndim == 0 else out


def ks_statistic(values, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a callable CDF."""
    values = np.sort(np.asarray(values, dtype=float))
    n = values.size
    f = np.asarray(cdf(values), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))

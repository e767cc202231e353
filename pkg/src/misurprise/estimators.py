"""Plug-in (maximum likelihood) entropy and mutual information estimators.

Everything here works in nats. Counts live in a dense ``ContingencyTable``
whose rows index input categories and columns index output categories.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

# negative MI within this tolerance is floating-point noise
MI_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class Discretizer:
    """Map real values onto ``bin_count`` equal-width bins over ``[lo, hi)``.

    Values outside the range are clamped into the first or last bin.
    """

    bin_count: int
    lo: float
    hi: float

    def __post_init__(self):
        if int(self.bin_count) != self.bin_count or self.bin_count < 1:
            raise ValueError(f"bin_count must be a positive integer, got {self.bin_count}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("value range must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got ({self.lo}, {self.hi})")

    @classmethod
    def from_values(cls, values, bin_count: int) -> "Discretizer":
        """Freeze a range from observed data. A constant sample gets a unit-wide range."""
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise ValueError("cannot derive a range from no values")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        lo, hi = float(v.min()), float(v.max())
        if hi <= lo:
            hi = lo + 1.0
        return cls(bin_count, lo, hi)

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bin_count

    def transform(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("cannot discretize non-finite values")
        idx = np.floor((v - self.lo) / self.width).astype(np.int64)
        # the upper edge is exclusive, so anything >= hi lands in the last bin
        return np.clip(idx, 0, self.bin_count - 1)


def discretize(value: float, d: Discretizer) -> int:
    """Bin index of a single value."""
    if not math.isfinite(value):
        raise ValueError(f"cannot discretize non-finite value {value!r}")
    return int(d.transform([value])[0])


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Joint counts over (input category, output category)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError(f"counts must be a non-empty 2-D array, got shape {c.shape}")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.equal(np.mod(c, 1), 0)):
                raise ValueError("counts must be integers")
        c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_pairs(cls, xs, ys, x_cardinality: int, y_cardinality: int) -> "ContingencyTable":
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        if xs.shape != ys.shape:
            raise ValueError("xs and ys must have the same length")
        if xs.size and (xs.min() < 0 or xs.max() >= x_cardinality):
            raise ValueError("x category out of range")
        if ys.size and (ys.min() < 0 or ys.max() >= y_cardinality):
            raise ValueError("y category out of range")
        flat = np.bincount(xs * y_cardinality + ys, minlength=x_cardinality * y_cardinality)
        return cls(flat.reshape(x_cardinality, y_cardinality))

    @property
    def x_cardinality(self) -> int:
        return self.counts.shape[0]

    @property
    def y_cardinality(self) -> int:
        return self.counts.shape[1]

    @cached_property
    def total_n(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def x_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @cached_property
    def y_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T.copy())

    def merge_y(self, a: int, b: int) -> "ContingencyTable":
        """Collapse output categories ``a`` and ``b`` into ``a``."""
        if a == b:
            return self
        c = self.counts.copy()
        c[:, a] += c[:, b]
        return ContingencyTable(np.delete(c, b, axis=1))

    def extends(self, other: "ContingencyTable") -> bool:
        """True if this table holds every count of ``other`` plus at least one more."""
        return (self.counts.shape == other.counts.shape
                and bool(np.all(self.counts >= other.counts))
                and self.total_n > other.total_n)


@dataclass(frozen=True)
class EntropyDecomposition:
    h_x: float
    h_y: float
    h_xy: float
    mi: float

    @property
    def h_y_given_x(self) -> float:
        return self.h_xy - self.h_x


def mle_entropy(counts) -> float:
    """Plug-in entropy ``-sum p log p`` of a count vector, with 0 log 0 = 0."""
    c = np.asarray(counts, dtype=float).ravel()
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("counts must be finite and non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("entropy of an all-zero count vector is undefined")
    p = c[c > 0] / total
    return max(float(-np.sum(p * np.log(p))), 0.0)


def mle_mutual_information(t: ContingencyTable) -> EntropyDecomposition:
    if t.total_n < 1:
        raise ValueError("mutual information of an empty table is undefined")
    h_x = mle_entropy(t.x_marginal)
    h_y = mle_entropy(t.y_marginal)
    h_xy = mle_entropy(t.counts)
    mi = h_x + h_y - h_xy
    if -MI_CLAMP_TOL < mi < 0.0:
        mi = 0.0
    return EntropyDecomposition(h_x, h_y, h_xy, mi)


def _encode(values) -> np.ndarray:
    _, inv = np.unique(np.asarray(values), return_inverse=True)
    return inv.ravel()


def mi_from_pairs(xs, ys) -> float:
    """MLE mutual information of raw paired samples with arbitrary hashable labels."""
    xi, yi = _encode(xs), _encode(ys)
    if xi.size == 0:
        raise ValueError("need at least one sample")
    t = ContingencyTable.from_pairs(xi, yi, int(xi.max()) + 1, int(yi.max()) + 1)
    return mle_mutual_information(t).mi


@dataclass(frozen=True)
class PermutationConfig:
    shuffle_count: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if self.shuffle_count < 1:
            raise ValueError("shuffle_count must be >= 1")


def permutation_test(old: Sequence, new: Sequence, cfg: PermutationConfig,
                     exhaustive: bool = False) -> float:
    """Permutation test on the difference of MI estimates between two sample groups.

    ``old`` and ``new`` are sequences of (x, y) pairs. Returns
    ``p = mean(|dI| > |dI_i|)`` over reshuffles of the pooled sample into groups
    of the original sizes, where ``dI = I(old) - I(new)``. Note the direction:
    a large p means the observed difference is extreme.

    With ``exhaustive=True`` every distinct split is enumerated once and
    ``shuffle_count`` is ignored.
    """
    if len(old) == 0 or len(new) == 0:
        raise ValueError("both sample groups must be non-empty")
    pooled = list(old) + list(new)
    xs = _encode([p[0] for p in pooled])
    ys = _encode([p[1] for p in pooled])
    n, m = len(old), len(new)
    xc, yc = int(xs.max()) + 1, int(ys.max()) + 1

    def group_mi(idx) -> float:
        return mle_mutual_information(
            ContingencyTable.from_pairs(xs[idx], ys[idx], xc, yc)).mi

    all_idx = np.arange(n + m)
    observed = abs(group_mi(all_idx[:n]) - group_mi(all_idx[n:]))

    if exhaustive:
        hits = total = 0
        for first in itertools.combinations(range(n + m), n):
            mask = np.zeros(n + m, dtype=bool)
            mask[list(first)] = True
            d = abs(group_mi(all_idx[mask]) - group_mi(all_idx[~mask]))
            hits += observed > d
            total += 1
        return hits / total

    rng = np.random.default_rng(cfg.rng_seed)
    hits = 0
    for _ in range(cfg.shuffle_count):
        perm = rng.permutation(n + m)
        d = abs(group_mi(perm[:n]) - group_mi(perm[n:]))
        hits += observed > d
    return hits / cfg.shuffle_count


def std_bound(n: int) -> float:
    """Order-of-magnitude bound ``log(n)/sqrt(n)`` on the std of the MI estimate."""
    if n < 2:
        raise ValueError("std bound needs n >= 2")
    return math.log(n) / math.sqrt(n)


def variance_test_bound(n, m, z_alpha: float):
    """Half-width of the two-sample z-test built from ``std_bound`` at n and n + m.

    ``n`` and ``m`` may be arrays."""
    n, m = np.asarray(n, dtype=float), np.asarray(m, dtype=float)
    if np.any(n < 1) or np.any(m < 1):
        raise ValueError("need n >= 1 and m >= 1")
    k = n + m
    b = z_alpha * np.sqrt(np.log(k) ** 2 / k + np.log(n) ** 2 / n)
    return float(b) if b.ndim == 0 else b


def single_swap_bound(n: int) -> float:
    """Largest change of the MI estimate when one of n observations is replaced."""
    if n < 2:
        raise ValueError("need n >= 2")
    return 2.0 * math.log(n) / n

"""Year-indexed series with the classical identification toolkit.

``AnnualSeries`` is an immutable container for one value per consecutive
year. The module provides differencing and its exact inverse, sample
autocorrelations (biased normalization, so the autocovariance sequence is
positive semi-definite), partial autocorrelations via Durbin-Levinson, and
chronological splitting.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class AnnualSeries:
    """Contiguous annual series: ``values[i]`` belongs to ``start_year + i``."""

    start_year: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).copy()
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("series must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series values must all be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_year", int(self.start_year))

    def __len__(self) -> int:
        return self.values.size

    @property
    def end_year(self) -> int:
        return self.start_year + len(self) - 1

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.start_year + len(self))

    def value_at(self, year: int) -> float:
        if not self.start_year <= year <= self.end_year:
            raise ValueError(f"year {year} outside series range "
                             f"[{self.start_year}, {self.end_year}]")
        return float(self.values[year - self.start_year])


def difference(s: AnnualSeries, d: int) -> AnnualSeries:
    """Apply the first-difference operator ``d`` times.

    The result has ``len(s) - d`` points and its start year advances by
    ``d``; ``d = 0`` returns the series unchanged.
    """
    if d < 0:
        raise ValueError("differencing order must be non-negative")
    if d >= len(s):
        raise ValueError(f"cannot difference a length-{len(s)} series {d} times")
    if d == 0:
        return s
    return AnnualSeries(s.start_year + d, np.diff(s.values, n=d))


def integrate(diff: AnnualSeries, heads: Sequence[float]) -> AnnualSeries:
    """Invert :func:`difference`.

    ``heads[j]`` must be the first value of the j-th differencing stage
    (``heads[0]`` from the original series, ``heads[1]`` from its first
    difference, and so on), i.e. exactly the values differencing drops.
    """
    heads = [float(h) for h in heads]
    cur = diff.values
    for head in reversed(heads):
        cur = np.concatenate(([head], head + np.cumsum(cur)))
    return AnnualSeries(diff.start_year - len(heads), cur)


def difference_heads(s: AnnualSeries, d: int) -> list[float]:
    """The ``d`` leading values that :func:`integrate` needs to undo ``difference(s, d)``."""
    heads = []
    cur = s.values
    for _ in range(d):
        heads.append(float(cur[0]))
        cur = np.diff(cur)
    return heads


def acf(s: AnnualSeries, max_lag: int) -> np.ndarray:
    """Sample autocorrelations r_0..r_max_lag with 1/n normalization.

    The divide-by-n estimator keeps the implied autocovariance sequence
    positive semi-definite, so ``|r_k| <= 1`` and Durbin-Levinson stays
    stable on its output.
    """
    n = len(s)
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    x = s.values - s.values.mean()
    c0 = float(np.dot(x, x)) / n
    if c0 == 0.0:
        raise DomainError("autocorrelation undefined for a zero-variance series")
    r = np.empty(max_lag + 1)
    r[0] = 1.0
    for k in range(1, max_lag + 1):
        r[k] = float(np.dot(x[k:], x[:-k])) / n / c0
    return r


def pacf(s: AnnualSeries, max_lag: int) -> np.ndarray:
    """Partial autocorrelations via Durbin-Levinson on :func:`acf` output.

    Index 0 is 1.0 by convention; index k is the lag-k partial
    autocorrelation, with ``pacf[1] == acf[1]`` exactly.
    """
    r = acf(s, max_lag)
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    if max_lag == 0:
        return out
    phi_prev = np.array([r[1]])
    out[1] = r[1]
    v = 1.0 - r[1] * r[1]
    for k in range(2, max_lag + 1):
        if v <= 1e-14:
            raise DomainError(f"series is numerically degenerate at lag {k}; "
                              "partial autocorrelation is undefined")
        num = r[k] - float(np.dot(phi_prev, r[k - 1:0:-1]))
        phi_kk = num / v
        phi_prev = np.concatenate((phi_prev - phi_kk * phi_prev[::-1], [phi_kk]))
        out[k] = phi_kk
        v *= 1.0 - phi_kk * phi_kk
    return out


def yule_walker_ar(s: AnnualSeries, p: int) -> np.ndarray:
    """Order-p AR coefficients from the Durbin-Levinson recursion."""
    if p == 0:
        return np.empty(0)
    r = acf(s, p)
    phi = np.array([r[1]])
    v = 1.0 - r[1] * r[1]
    for k in range(2, p + 1):
        if v <= 1e-14:
            break
        phi_kk = (r[k] - float(np.dot(phi, r[k - 1:0:-1]))) / v
        phi = np.concatenate((phi - phi_kk * phi[::-1], [phi_kk]))
        v *= 1.0 - phi_kk * phi_kk
    if phi.size < p:
        phi = np.concatenate((phi, np.zeros(p - phi.size)))
    return phi


def split_chronological(s: AnnualSeries, holdout_fraction: float) -> tuple[AnnualSeries, AnnualSeries]:
    """Leading share for training, trailing share for testing, no shuffling.

    The test length is ``round(n * holdout_fraction)`` clamped so both
    parts are non-empty; concatenating the parts reproduces the input.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(f"holdout fraction must be in (0, 1), got {holdout_fraction}")
    n = len(s)
    n_test = int(n * holdout_fraction + 0.5)
    n_test = max(1, min(n - 1, n_test))
    n_train = n - n_test
    train = AnnualSeries(s.start_year, s.values[:n_train])
    test = AnnualSeries(s.start_year + n_train, s.values[n_train:])
    return train, test

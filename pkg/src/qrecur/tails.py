"""Partial sums of horizon-truncated series with power-law tail intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TailFit", "SeriesEstimate", "fit_power_tail", "estimate_sum", "TAIL_SAFETY"]

# the reported upper bound is this multiple of the fitted tail
TAIL_SAFETY = 2.0
# terms below this are treated as exact zeros (finite or exponentially decaying tails)
ZERO_TERM = 1e-30
MIN_ZERO_DECADE = 8


@dataclass(frozen=True)
class TailFit:
    """Fit ``term_n ~ coefficient * n**exponent`` on the last decade of a series.

    ``density`` is the fraction of non-zero terms in that decade (1/2 when
    only every other term is populated).
    """

    exponent: float
    coefficient: float
    density: float
    first: int
    last: int

    def tail_sum(self, after: int) -> float:
        """Extrapolated sum of the terms with index > ``after``."""
        p = -self.exponent
        if not np.isfinite(p) or p <= 1.05:
            return np.inf
        x0 = after + 0.5
        return float(self.density * self.coefficient * x0 ** (1.0 - p) / (p - 1.0))

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "density": self.density,
            "fit_range": [self.first, self.last],
        }


def fit_power_tail(terms: np.ndarray, start: int = 1) -> TailFit | None:
    """Power-law fit over the last decade of ``terms``.

    The exponent is a least-squares slope in log-log scale; the coefficient
    matches the arithmetic mean of the decade.

    Parameters
    ----------
    terms : array of non-negative reals
        ``terms[i]`` is the term of index ``start + i``.
    start : int

    Returns
    -------
    TailFit or None
        None when the decade is too short or carries no non-zero terms.
    """
    terms = np.asarray(terms, dtype=float)
    last = start + len(terms) - 1
    first = max(start, int(np.ceil(last / 10.0)))
    if last - first < 4:
        return None
    idx = np.arange(first, last + 1)
    seg = terms[first - start:]
    mask = seg > ZERO_TERM
    if mask.sum() < 3:
        return None
    x = np.log(idx[mask])
    y = np.log(seg[mask])
    slope, _ = np.polyfit(x, y, 1)
    # the log fit gives the geometric mean of oscillating terms; take the
    # amplitude from the arithmetic mean so the extrapolated sum is unbiased
    coefficient = np.sum(seg[mask]) / np.sum(idx[mask] ** slope)
    return TailFit(float(slope), float(coefficient), float(mask.mean()), first, last)


@dataclass(frozen=True)
class SeriesEstimate:
    """A partial sum together with an extrapolated tail.

    ``partial`` may be a scalar or a Hermitian matrix; tails are scalars
    (for matrices, a bound on the operator norm of the missing part).
    """

    partial: object
    tail_estimate: float
    tail_bound: float
    fit: TailFit | None = None
    horizon: int | None = None

    @property
    def lower(self):
        return self.partial

    @property
    def upper(self):
        return self.partial + self.tail_bound if np.ndim(self.partial) == 0 else None

    @property
    def estimate(self):
        return self.partial + self.tail_estimate if np.ndim(self.partial) == 0 else None

    @property
    def exact(self) -> bool:
        return self.tail_bound == 0.0

    def interval(self, cap: float | None = None) -> tuple[float, float]:
        lo, hi = float(self.partial), float(self.partial + self.tail_bound)
        if cap is not None:
            hi = min(hi, cap)
        return lo, hi


def estimate_sum(terms: np.ndarray, start: int = 1, tail: str = "powerlaw", partial=None) -> SeriesEstimate:
    """Sum non-negative ``terms`` and attach a tail interval.

    With ``tail="none"`` the tail is reported as zero only when the last
    decade vanishes identically; otherwise it is left open (infinite bound),
    since nothing is extrapolated.
    """
    terms = np.asarray(terms, dtype=float)
    total = float(np.sum(terms)) if partial is None else partial
    horizon = start + len(terms) - 1
    first = max(start, int(np.ceil(horizon / 10.0)))
    decade = terms[first - start:]
    # a vanishing decade only proves an exact tail when it is long enough to
    # rule out gaps in the support (lattice periodicity)
    if decade.size >= MIN_ZERO_DECADE and np.all(decade <= ZERO_TERM):
        return SeriesEstimate(total, 0.0, 0.0, None, horizon)
    if tail == "none":
        return SeriesEstimate(total, 0.0, np.inf, None, horizon)
    if tail != "powerlaw":
        raise ValueError(f"unknown tail policy {tail!r}")
    fit = fit_power_tail(terms, start)
    if fit is None:
        return SeriesEstimate(total, np.inf, np.inf, None, horizon)
    est = fit.tail_sum(horizon)
    return SeriesEstimate(total, est, TAIL_SAFETY * est, fit, horizon)

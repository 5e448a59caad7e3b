"""Confidence-set primitives shared by every construction and detector.

Two kinds of sets appear in this package:

* :class:`Interval` for scalar parameters (means, MMD distances);
* :class:`CdfBand` / :class:`BandEnvelope` for distribution functions under
  the Kolmogorov-Smirnov metric.

Bands are right-continuous step functions.  A band stores its value on each
breakpoint plus the value on the open region to the left of the first
breakpoint, so every check done on the breakpoint grid is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lower, upper]`` over the extended reals.

    Emptiness is carried by an explicit flag; use :meth:`empty_set` to build
    the canonical empty interval.
    """

    lower: float
    upper: float
    empty: bool = False

    def __post_init__(self):
        if not self.empty:
            if math.isnan(self.lower) or math.isnan(self.upper):
                raise ValueError("interval endpoints must not be NaN")
            if self.lower > self.upper:
                raise ValueError(
                    f"lower {self.lower} exceeds upper {self.upper}; "
                    "use Interval.empty_set() for the empty interval")

    @classmethod
    def empty_set(cls) -> "Interval":
        return cls(math.inf, -math.inf, empty=True)

    @classmethod
    def real_line(cls) -> "Interval":
        return cls(-math.inf, math.inf)

    @property
    def bounded(self) -> bool:
        return not self.empty and math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def length(self) -> float:
        return 0.0 if self.empty else self.upper - self.lower

    def __contains__(self, value: float) -> bool:
        return (not self.empty) and self.lower <= value <= self.upper

    def clip(self, lo: float = -math.inf, hi: float = math.inf) -> "Interval":
        """Intersect with the parameter range ``[lo, hi]``."""
        return intersect(self, Interval(lo, hi))


def intersect(a: Interval, b: Interval) -> Interval:
    if a.empty or b.empty:
        return Interval.empty_set()
    lo = max(a.lower, b.lower)
    hi = min(a.upper, b.upper)
    if lo > hi:
        return Interval.empty_set()
    return Interval(lo, hi)


def _interval_separation(a: Interval, b: Interval) -> float:
    return max(b.lower - a.upper, a.lower - b.upper, 0.0)


def span(a: Interval, b: Interval) -> float:
    """Largest distance between a point of ``a`` and a point of ``b``."""
    if a.empty or b.empty:
        raise ValueError("empty set has no span")
    if not (a.bounded and b.bounded):
        raise ValueError("span of an unbounded interval is infinite")
    return max(abs(a.upper - b.lower), abs(b.upper - a.lower))


# ---------------------------------------------------------------------------
# CDF bands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CdfBand:
    """Kolmogorov-Smirnov ball of radius ``half_width`` around a step CDF.

    ``empirical_cdf[j]`` is the value of the centre CDF on
    ``[breakpoints[j], breakpoints[j+1])``; the centre is 0 left of the first
    breakpoint.
    """

    breakpoints: np.ndarray
    empirical_cdf: np.ndarray
    half_width: float

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        F = np.asarray(self.empirical_cdf, dtype=float)
        if bp.ndim != 1 or bp.shape != F.shape:
            raise ValueError("breakpoints and empirical_cdf must be 1-d arrays of equal length")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(F) < 0) or (F.size and (F[0] < 0 or F[-1] > 1)):
            raise ValueError("empirical_cdf must be nondecreasing in [0, 1]")
        if not self.half_width >= 0:
            raise ValueError("half_width must be nonnegative")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "empirical_cdf", F)

    @classmethod
    def from_samples(cls, samples, half_width: float) -> "CdfBand":
        x = np.sort(np.asarray(samples, dtype=float))
        bp, counts = np.unique(x, return_counts=True)
        return cls(bp, np.cumsum(counts) / x.size, half_width)

    @property
    def lower(self) -> np.ndarray:
        return np.maximum(self.empirical_cdf - self.half_width, 0.0)

    @property
    def upper(self) -> np.ndarray:
        return np.minimum(self.empirical_cdf + self.half_width, 1.0)

    def envelope(self) -> "BandEnvelope":
        return BandEnvelope(self.breakpoints, self.lower, self.upper,
                            upper_left=min(self.half_width, 1.0))


@dataclass(frozen=True)
class BandEnvelope:
    """Pointwise lower/upper step functions bounding a set of CDFs.

    ``upper_left`` is the upper bound left of the first breakpoint (the lower
    bound there is always 0).
    """

    breakpoints: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    upper_left: float = 1.0

    def __post_init__(self):
        for name in ("breakpoints", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.breakpoints.shape == self.lower.shape == self.upper.shape):
            raise ValueError("envelope arrays must share one shape")

    @classmethod
    def vacuous(cls) -> "BandEnvelope":
        return cls(np.empty(0), np.empty(0), np.empty(0), 1.0)

    def on_grid(self, grid: np.ndarray):
        """Evaluate (lower, upper) at arbitrary points using step semantics."""
        idx = np.searchsorted(self.breakpoints, grid, side="right")
        lo = np.concatenate([[0.0], self.lower])[idx]
        hi = np.concatenate([[self.upper_left], self.upper])[idx]
        return lo, hi


BandLike = Union[CdfBand, BandEnvelope]


def _as_envelope(x: BandLike) -> BandEnvelope:
    return x.envelope() if isinstance(x, CdfBand) else x


def fold_band(env: Optional[BandEnvelope], band: BandLike) -> BandEnvelope:
    """Intersect an envelope with another band on the merged breakpoint grid."""
    new = _as_envelope(band)
    if env is None:
        return new
    grid = np.union1d(env.breakpoints, new.breakpoints)
    lo_a, hi_a = env.on_grid(grid)
    lo_b, hi_b = new.on_grid(grid)
    return BandEnvelope(grid, np.maximum(lo_a, lo_b), np.minimum(hi_a, hi_b),
                        min(env.upper_left, new.upper_left))


def band_feasible(env: BandLike) -> bool:
    """Whether some nondecreasing CDF fits inside the envelope."""
    env = _as_envelope(env)
    if env.upper_left < 0:
        return False
    if env.lower.size == 0:
        return True
    return bool(np.all(np.maximum.accumulate(env.lower) <= env.upper))


def band_contains(env: BandLike, cdf: Callable[[np.ndarray], np.ndarray]) -> bool:
    """Whether a continuous CDF lies inside the envelope everywhere.

    On ``[x_j, x_{j+1})`` a continuous increasing ``F`` ranges over
    ``[F(x_j), F(x_{j+1}))``, so it suffices to compare the envelope with
    ``F`` at both ends of each cell.
    """
    env = _as_envelope(env)
    bp = env.breakpoints
    if bp.size == 0:
        return env.upper_left >= 1.0
    F = np.asarray(cdf(bp), dtype=float)
    if F[0] > env.upper_left:
        return False
    if np.any(F < env.lower):
        return False
    # right end of each cell; the last cell extends to +inf where F -> 1
    right = np.concatenate([F[1:], [1.0]])
    return bool(np.all(right <= env.upper))


def _regularize(env: BandEnvelope, grid: np.ndarray):
    lo, hi = env.on_grid(grid)
    lo = np.concatenate([[0.0], lo])
    hi = np.concatenate([[env.upper_left], hi])
    lo = np.maximum.accumulate(lo)
    hi = np.minimum.accumulate(hi[::-1])[::-1]
    return lo, hi


def band_separation(a: BandLike, b: BandLike) -> float:
    """KS distance between the CDF sets described by two bands.

    Both envelopes are put on the joint grid, made monotone (running max of
    the lower bound, reverse running min of the upper bound), and the largest
    vertical gap between the two value ranges is returned.
    """
    ea, eb = _as_envelope(a), _as_envelope(b)
    if not (band_feasible(ea) and band_feasible(eb)):
        raise ValueError("empty set has no separation")
    grid = np.union1d(ea.breakpoints, eb.breakpoints)
    lo_a, hi_a = _regularize(ea, grid)
    lo_b, hi_b = _regularize(eb, grid)
    gap = max(np.max(lo_a - hi_b), np.max(lo_b - hi_a))
    return float(max(gap, 0.0))


def band_span(a: BandLike, b: BandLike) -> float:
    """Largest KS distance between a CDF in ``a`` and a CDF in ``b``."""
    ea, eb = _as_envelope(a), _as_envelope(b)
    if not (band_feasible(ea) and band_feasible(eb)):
        raise ValueError("empty set has no span")
    grid = np.union1d(ea.breakpoints, eb.breakpoints)
    lo_a, hi_a = _regularize(ea, grid)
    lo_b, hi_b = _regularize(eb, grid)
    return float(max(np.max(hi_a - lo_b), np.max(hi_b - lo_a), 0.0))


@dataclass(frozen=True)
class KnownCdf:
    """Singleton set holding one continuous CDF (a known pre-change law)."""

    cdf: Callable[[np.ndarray], np.ndarray]

    def at(self, x) -> np.ndarray:
        return np.asarray(self.cdf(np.asarray(x, dtype=float)), dtype=float)


def _cdf_cells(point: KnownCdf, env: BandEnvelope):
    """Regularised band and the CDF at both ends of every cell.

    Cells are the left region ``(-inf, x_1)``, then ``[x_j, x_{j+1})``, the
    last one running to ``+inf``.
    """
    bp = env.breakpoints
    lo, hi = _regularize(env, bp)
    F = point.at(bp)
    left = np.concatenate([[0.0], F])
    right = np.concatenate([F, [1.0]])
    return lo, hi, left, right


def cdf_band_separation(point: KnownCdf, env: BandLike) -> float:
    env = _as_envelope(env)
    if not band_feasible(env):
        raise ValueError("empty set has no separation")
    lo, hi, left, right = _cdf_cells(point, env)
    return float(max(np.max(lo - left), np.max(right - hi), 0.0))


def cdf_band_span(point: KnownCdf, env: BandLike) -> float:
    env = _as_envelope(env)
    if not band_feasible(env):
        raise ValueError("empty set has no span")
    lo, hi, left, right = _cdf_cells(point, env)
    return float(max(np.max(hi - left), np.max(right - lo), 0.0))


def separation(a, b) -> float:
    """Infimum distance between two nonempty confidence sets."""
    if isinstance(a, KnownCdf):
        return cdf_band_separation(a, b)
    if isinstance(b, KnownCdf):
        return cdf_band_separation(b, a)
    if isinstance(a, Interval) and isinstance(b, Interval):
        if a.empty or b.empty:
            raise ValueError("empty set has no separation")
        return _interval_separation(a, b)
    return band_separation(a, b)


def set_span(a, b) -> float:
    """Largest distance between a point of ``a`` and a point of ``b``."""
    if isinstance(a, KnownCdf):
        return cdf_band_span(a, b)
    if isinstance(b, KnownCdf):
        return cdf_band_span(b, a)
    if isinstance(a, Interval) and isinstance(b, Interval):
        return span(a, b)
    return band_span(a, b)


def is_empty(s) -> bool:
    if isinstance(s, KnownCdf):
        return False
    if isinstance(s, Interval):
        return s.empty
    return not band_feasible(s)


def meet(a, b):
    """Intersection of two sets of the same kind."""
    if isinstance(a, Interval):
        return intersect(a, b)
    return fold_band(_as_envelope(a), b)


@dataclass
class RunningIntersection:
    """Fold of confidence sets, ``current = S_1 & ... & S_count``."""

    current: object = None
    count: int = 0
    history: Optional[list] = field(default=None, repr=False)

    def fold(self, s):
        self.current = s if self.current is None else meet(self.current, s)
        if isinstance(self.current, CdfBand):
            self.current = self.current.envelope()
        self.count += 1
        if self.history is not None:
            self.history.append(self.current)
        return self.current

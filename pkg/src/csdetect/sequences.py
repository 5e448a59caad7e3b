"""Confidence sequences with closed-form widths.

Each construction comes in two forms that must agree exactly:

* an incremental state (``update(x)`` returns the current confidence set),
  used for the forward sequence of a detector;
* a vectorised ``path`` over a whole observation array, used to rebuild
  backward sequences from a buffer in one numpy pass.

All logarithms are natural.  Where an iterated logarithm in a width formula
is undefined or negative (tiny ``t``) the width is ``+inf`` and the set is
the whole parameter range.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .sets import BandEnvelope, CdfBand, Interval, intersect


def _check_alpha(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def _finite_observation(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"invalid observation: {x}")
    return x


class Sidedness(str, enum.Enum):
    TWO_SIDED = "two_sided"
    UPPER_ONLY = "upper_only"
    LOWER_ONLY = "lower_only"

    def opposite(self) -> "Sidedness":
        if self is Sidedness.UPPER_ONLY:
            return Sidedness.LOWER_ONLY
        if self is Sidedness.LOWER_ONLY:
            return Sidedness.UPPER_ONLY
        return self


def apply_sidedness(s: Interval, mode: Sidedness,
                    theta_range=(-math.inf, math.inf)) -> Interval:
    """Relax one end of an interval to the edge of the parameter range."""
    mode = Sidedness(mode)
    lo, hi = theta_range
    if s.empty:
        return s
    if mode is Sidedness.UPPER_ONLY:
        s = Interval(lo, max(s.upper, lo))
    elif mode is Sidedness.LOWER_ONLY:
        s = Interval(min(s.lower, hi), hi)
    return s.clip(lo, hi)


def _sided_arrays(lo, hi, mode: Sidedness, theta_range):
    mode = Sidedness(mode)
    tlo, thi = theta_range
    if mode is Sidedness.UPPER_ONLY:
        lo = np.full_like(lo, tlo)
    elif mode is Sidedness.LOWER_ONLY:
        hi = np.full_like(hi, thi)
    return np.maximum(lo, tlo), np.minimum(hi, thi)


# ---------------------------------------------------------------------------
# width formulas
# ---------------------------------------------------------------------------


def _loglog(z):
    """log(log(z)) with NaN where it is undefined or negative."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.log(z))
    return np.where(np.isfinite(out) & (out >= 0), out, np.nan)


def gaussian_width(t, alpha: float):
    """Diameter of the unit-variance Gaussian mean CS after ``t`` samples."""
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore"):
        w = 3.4 * np.sqrt((_loglog(2.0 * t) + 0.72 * math.log(10.4 / alpha)) / t)
    return np.where(np.isnan(w), np.inf, w)


def ks_width(t, alpha: float):
    """Diameter of the KS confidence band after ``t`` samples."""
    t = np.asarray(t, dtype=float)
    loglog = np.log1p(np.log(t))          # log log(e t)
    return 1.7 * np.sqrt((loglog + 0.8 * math.log(1612.0 / alpha)) / t)


def _log2_floor1(t):
    return np.maximum(1.0, np.log2(np.asarray(t, dtype=float)))


def mmd_kappa(t, alpha: float):
    t = np.asarray(t, dtype=float)
    l2 = _log2_floor1(t)
    return np.sqrt((np.log(l2 ** 2 * math.pi ** 2 / 6.0) + math.log(4.0 / alpha)) / t)


def mmd_gamma(t, alpha: float):
    t = np.asarray(t, dtype=float)
    l2 = _log2_floor1(t)
    inner = np.log(3.54 * math.e * l2 ** 3) + math.log(2.0 / alpha)
    return (4.0 * math.sqrt(2.0) / np.sqrt(t)) * (1.0 + np.sqrt(inner))


def psi_e(lam):
    lam = np.asarray(lam, dtype=float)
    return (-np.log1p(-lam) - lam) / 4.0


# ---------------------------------------------------------------------------
# Gaussian mean
# ---------------------------------------------------------------------------


@dataclass
class GaussianCsState:
    alpha: float
    n: int = 0
    sum: float = 0.0

    def update(self, x) -> Interval:
        x = _finite_observation(x)
        self.n += 1
        self.sum += x
        return self.current()

    def current(self) -> Interval:
        if self.n == 0:
            return Interval.real_line()
        half = float(gaussian_width(self.n, self.alpha)) / 2.0
        mean = self.sum / self.n
        if math.isinf(half):
            return Interval.real_line()
        return Interval(mean - half, mean + half)


class GaussianMeanCS:
    """CS for the mean of unit-variance Gaussian (or 1-sub-Gaussian) data."""

    name = "gaussian_mean"
    kind = "interval"
    theta_range = (-math.inf, math.inf)

    def __init__(self, alpha: float):
        self.alpha = _check_alpha(alpha)

    def new_state(self) -> GaussianCsState:
        return GaussianCsState(self.alpha)

    def width(self, t):
        return gaussian_width(t, self.alpha)

    def path(self, xs):
        xs = np.asarray(xs, dtype=float)
        if not np.all(np.isfinite(xs)):
            raise ValueError("invalid observation")
        t = np.arange(1, xs.size + 1)
        # loop-free but with the same left-to-right summation as the state
        mean = np.cumsum(xs) / t
        half = self.width(t) / 2.0
        return mean - half, mean + half


# ---------------------------------------------------------------------------
# Empirical Bernstein (bounded mean)
# ---------------------------------------------------------------------------


@dataclass
class EbCsState:
    """Predictable-plug-in empirical Bernstein CS for means of [0, 1] data."""

    alpha: float
    n: int = 0
    sum: float = 0.0
    running_mean_num: float = 0.5
    running_var_num: float = 0.25
    lambda_sum: float = 0.0
    weighted_sum: float = 0.0
    vpsi_sum: float = 0.0

    def update(self, x) -> Interval:
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"observation out of support: {x}")
        t = self.n + 1
        log_term = math.log(2.0 / self.alpha)
        mu_prev = self.running_mean_num / t
        var_prev = self.running_var_num / t
        lam = min(math.sqrt(2.0 * log_term / (var_prev * t * math.log(t + 1.0))), 0.5)
        v = 4.0 * (x - mu_prev) ** 2
        self.vpsi_sum += v * (-math.log1p(-lam) - lam) / 4.0
        self.lambda_sum += lam
        self.weighted_sum += lam * x
        self.n = t
        self.sum += x
        self.running_mean_num += x
        mu_t = self.running_mean_num / (t + 1)
        self.running_var_num += (x - mu_t) ** 2
        return self.current()

    def radius(self) -> float:
        if self.n == 0:
            return math.inf
        return (math.log(2.0 / self.alpha) + self.vpsi_sum) / self.lambda_sum

    def current(self) -> Interval:
        if self.n == 0:
            return Interval(0.0, 1.0)
        centre = self.weighted_sum / self.lambda_sum
        r = self.radius()
        return Interval(centre - r, centre + r).clip(0.0, 1.0)


class EmpiricalBernsteinCS:
    """Empirical Bernstein CS for the mean of observations in [0, 1].

    The interval is centred at the lambda-weighted mean with radius
    ``(log(2/alpha) + sum v_i psi_E(lambda_i)) / sum lambda_i``.
    """

    name = "bounded_mean"
    kind = "interval"
    theta_range = (0.0, 1.0)

    def __init__(self, alpha: float):
        self.alpha = _check_alpha(alpha)

    def new_state(self) -> EbCsState:
        return EbCsState(self.alpha)

    def width(self, t):
        raise TypeError("empirical Bernstein widths are data dependent; "
                        "use width_proxy(variance)")

    def width_proxy(self, variance: float):
        """Deterministic diameter obtained by plugging in a known variance.

        ``sigma_hat`` is replaced by ``variance`` and each ``v_i`` by its
        expectation ``4 * variance``.
        """
        log_term = math.log(2.0 / self.alpha)
        variance = max(float(variance), 1e-12)

        def w(t):
            t = np.atleast_1d(np.asarray(t, dtype=np.int64))
            top = int(t.max())
            i = np.arange(1, top + 1, dtype=float)
            lam = np.minimum(np.sqrt(2 * log_term / (variance * i * np.log(i + 1))), 0.5)
            num = log_term + np.cumsum(4 * variance * psi_e(lam))
            out = 2.0 * num / np.cumsum(lam)
            return np.minimum(out[t - 1], 1.0)
        return w

    def path(self, xs):
        xs = np.asarray(xs, dtype=float)
        if np.any((xs < 0) | (xs > 1)):
            raise ValueError("observation out of support")
        n = xs.size
        t = np.arange(1, n + 1, dtype=float)
        log_term = math.log(2.0 / self.alpha)
        mean_num = 0.5 + np.cumsum(xs)
        mu = mean_num / (t + 1)
        mu_prev = np.concatenate([[0.5], mu[:-1]])
        var_num = 0.25 + np.cumsum((xs - mu) ** 2)
        var_prev = np.concatenate([[0.25], var_num[:-1]]) / t
        lam = np.minimum(np.sqrt(2 * log_term / (var_prev * t * np.log(t + 1))), 0.5)
        v = 4.0 * (xs - mu_prev) ** 2
        lam_sum = np.cumsum(lam)
        centre = np.cumsum(lam * xs) / lam_sum
        radius = (log_term + np.cumsum(v * psi_e(lam))) / lam_sum
        return np.maximum(centre - radius, 0.0), np.minimum(centre + radius, 1.0)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov band for a CDF
# ---------------------------------------------------------------------------


@dataclass
class KsCsState:
    alpha: float
    samples: list = field(default_factory=list)

    def update(self, x) -> CdfBand:
        x = _finite_observation(x)
        bisect.insort(self.samples, x)
        return self.current()

    def current(self) -> CdfBand:
        half = float(ks_width(max(len(self.samples), 1), self.alpha)) / 2.0
        if not self.samples:
            return CdfBand(np.empty(0), np.empty(0), 1.0)
        return CdfBand.from_samples(self.samples, half)


def ks_envelope_rows(xs, alpha: float, grid: Optional[np.ndarray] = None):
    """Prefix empirical CDF bands of ``xs`` evaluated on ``grid``.

    Returns ``(grid, lower, upper, upper_left)`` where row ``t-1`` of
    ``lower``/``upper`` is the clipped band after ``t`` observations.  Cost is
    O(n * len(grid)).
    """
    xs = np.asarray(xs, dtype=float)
    if grid is None:
        grid = np.unique(xs)
    n = xs.size
    t = np.arange(1, n + 1, dtype=float)
    half = (ks_width(t, alpha) / 2.0)[:, None]
    ranks = np.searchsorted(grid, xs, side="left")
    hits = np.zeros((n, grid.size), dtype=np.int32)
    hits[np.arange(n), ranks] = 1
    counts = np.cumsum(np.cumsum(hits, axis=1), axis=0)      # #{i<=t: x_i <= g_j}
    F = counts / t[:, None]
    lower = np.maximum(F - half, 0.0)
    upper = np.minimum(F + half, 1.0)
    upper_left = np.minimum(half[:, 0], 1.0)
    return grid, lower, upper, upper_left


class KolmogorovSmirnovCS:
    """Time-uniform KS band around the empirical CDF."""

    name = "cdf"
    kind = "band"
    theta_range = (0.0, 1.0)

    def __init__(self, alpha: float):
        self.alpha = _check_alpha(alpha)

    def new_state(self) -> KsCsState:
        return KsCsState(self.alpha)

    def width(self, t):
        return ks_width(t, self.alpha)

    def nested_envelopes(self, xs):
        """Envelope of the running intersection after every prefix.

        Returns ``(grid, lower, upper, upper_left)`` with one row per prefix.
        """
        grid, lo, hi, ul = ks_envelope_rows(xs, self.alpha)
        return (grid, np.maximum.accumulate(lo, axis=0),
                np.minimum.accumulate(hi, axis=0), np.minimum.accumulate(ul))

    def smallest(self, xs) -> BandEnvelope:
        """Running intersection of all prefix bands of ``xs``."""
        xs = np.asarray(xs, dtype=float)
        grid = np.unique(xs)
        n = xs.size
        # bands wider than the unit square carry no information
        t = np.arange(1, n + 1, dtype=float)
        informative = np.nonzero(ks_width(t, self.alpha) / 2.0 < 1.0)[0]
        lower = np.zeros(grid.size)
        upper = np.ones(grid.size)
        upper_left = 1.0
        if informative.size:
            start = informative[0]
            ranks = np.searchsorted(grid, xs, side="left")
            # counts for the first `start` rows, then the informative rows
            base = np.zeros(grid.size, dtype=np.int64)
            np.add.at(base, ranks[:start], 1)
            block = 2048
            for b0 in range(start, n, block):
                b1 = min(n, b0 + block)
                hits = np.zeros((b1 - b0, grid.size), dtype=np.int32)
                hits[np.arange(b1 - b0), ranks[b0:b1]] = 1
                counts = np.cumsum(hits, axis=0) + base
                base = counts[-1].copy()
                cdf = np.cumsum(counts, axis=1) / t[b0:b1, None]
                half = (ks_width(t[b0:b1], self.alpha) / 2.0)[:, None]
                lower = np.maximum(lower, np.max(cdf - half, axis=0))
                upper = np.minimum(upper, np.min(cdf + half, axis=0))
                upper_left = min(upper_left, float(half.min()))
        return BandEnvelope(grid, np.maximum(lower, 0.0), np.minimum(upper, 1.0),
                            min(upper_left, 1.0))


# ---------------------------------------------------------------------------
# kernel MMD between the two halves of paired observations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian RBF kernel ``exp(-|u - v|^2 / (2 bandwidth^2))``."""

    bandwidth: float
    family: str = "rbf"

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.family != "rbf":
            raise ValueError(f"unsupported kernel family {self.family!r}")


def rbf_kernel(u, v, bandwidth: float) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    d2 = float(np.sum((u - v) ** 2))
    return math.exp(-d2 / (2.0 * bandwidth ** 2))


def rbf_gram(A, B, bandwidth: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d2 = (np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :]
          - 2.0 * A @ B.T)
    return np.exp(-np.maximum(d2, 0.0) / (2.0 * bandwidth ** 2))


def median_heuristic(points) -> float:
    """Median pairwise Euclidean distance; 1.0 when it degenerates to 0."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] < 2:
        return 1.0
    d2 = np.sum(P ** 2, 1)[:, None] + np.sum(P ** 2, 1)[None, :] - 2 * P @ P.T
    iu = np.triu_indices(P.shape[0], k=1)
    med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
    return med if med > 0 else 1.0


def _pairs(pairs):
    P = np.asarray(pairs, dtype=float)
    if P.ndim == 2:                       # scalar halves, shape (n, 2)
        P = P[:, :, None]
    if P.ndim != 3 or P.shape[1] != 2:
        raise ValueError("paired observations must have shape (n, 2, p)")
    return P


def mmd_estimate(u_samples, v_samples, kernel: KernelSpec) -> float:
    """Plug-in (V-statistic) MMD between two equal-size samples."""
    U = np.asarray(u_samples, dtype=float)
    V = np.asarray(v_samples, dtype=float)
    if U.shape[0] != V.shape[0]:
        raise ValueError("u and v sample counts differ")
    if U.shape[0] < 1:
        raise ValueError("need at least one pair")
    n = U.shape[0]
    U = U.reshape(n, -1)
    V = V.reshape(n, -1)
    bw = kernel.bandwidth
    sq = (rbf_gram(U, U, bw).sum() + rbf_gram(V, V, bw).sum()
          - 2.0 * rbf_gram(U, V, bw).sum()) / n ** 2
    return math.sqrt(max(sq, 0.0))


class _Growable:
    def __init__(self, shape=(), dtype=float):
        self._data = np.empty((64,) + tuple(shape), dtype=dtype)
        self.n = 0

    def append(self, x):
        if self.n == self._data.shape[0]:
            new = np.empty((2 * self.n,) + self._data.shape[1:], dtype=self._data.dtype)
            new[: self.n] = self._data[: self.n]
            self._data = new
        self._data[self.n] = x
        self.n += 1

    @property
    def view(self) -> np.ndarray:
        return self._data[: self.n]


@dataclass
class MmdCsState:
    """Forward MMD CS with Gram sums maintained in O(t) per update.

    When no kernel is supplied the bandwidth follows the median heuristic on
    the pooled observations of the first ``calibration`` steps (accumulators
    are recomputed while it moves) and is frozen afterwards.
    """

    alpha: float
    kernel: Optional[KernelSpec] = None
    calibration: int = 100
    s_uu: float = 0.0
    s_vv: float = 0.0
    s_uv: float = 0.0

    def __post_init__(self):
        self._fixed = self.kernel is not None
        self._u = None
        self._v = None

    @property
    def n(self) -> int:
        return 0 if self._u is None else self._u.n

    @property
    def u_samples(self) -> np.ndarray:
        return self._u.view

    @property
    def v_samples(self) -> np.ndarray:
        return self._v.view

    def update(self, pair) -> Interval:
        P = _pairs(np.asarray(pair, dtype=float)[None, ...])[0]
        u, v = P[0], P[1]
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("invalid observation")
        if self._u is None:
            self._u, self._v = _Growable(u.shape), _Growable(v.shape)
        self._u.append(u)
        self._v.append(v)
        t = self.n
        U, V = self._u.view, self._v.view
        if not self._fixed and t <= self.calibration:
            self.kernel = KernelSpec(median_heuristic(np.vstack([U, V])))
            bw = self.kernel.bandwidth
            self.s_uu = rbf_gram(U, U, bw).sum()
            self.s_vv = rbf_gram(V, V, bw).sum()
            self.s_uv = rbf_gram(U, V, bw).sum()
        else:
            bw = self.kernel.bandwidth
            ku = rbf_gram(u[None], U, bw)[0]
            kv = rbf_gram(v[None], V, bw)[0]
            kuv_row = rbf_gram(u[None], V, bw)[0]       # k(u_t, v_j), j <= t
            kvu_col = rbf_gram(U[:-1], v[None], bw)[:, 0]  # k(u_i, v_t), i < t
            self.s_uu += 2.0 * ku[:-1].sum() + 1.0
            self.s_vv += 2.0 * kv[:-1].sum() + 1.0
            self.s_uv += kuv_row.sum() + kvu_col.sum()
        return self.current()

    def estimate(self) -> float:
        t = self.n
        return math.sqrt(max((self.s_uu + self.s_vv - 2.0 * self.s_uv) / t ** 2, 0.0))

    def current(self) -> Interval:
        if self.n == 0:
            return Interval(0.0, math.inf)
        m = self.estimate()
        return Interval(max(0.0, m - float(mmd_gamma(self.n, self.alpha))),
                        m + 2.0 * float(mmd_kappa(self.n, self.alpha)))


def prefix_mmd(pairs, kernel: KernelSpec) -> np.ndarray:
    """Plug-in MMD of every prefix of the paired sample, in O(n^2)."""
    P = _pairs(pairs)
    n = P.shape[0]
    bw = kernel.bandwidth
    U, V = P[:, 0, :], P[:, 1, :]

    def prefix_block_sums(K):
        # S(t) = sum_{i, j <= t} K_ij = S(t-1) + 2 sum_{j<t} K_tj + K_tt
        low = np.tril(K, -1).sum(axis=1)
        return np.cumsum(2.0 * low + np.diag(K))

    s_uu = prefix_block_sums(rbf_gram(U, U, bw))
    s_vv = prefix_block_sums(rbf_gram(V, V, bw))
    Kuv = rbf_gram(U, V, bw)
    # sum_{i,j<=t} Kuv_ij = cumsum over t of (row t up to t) + (column t above t)
    row_part = np.tril(Kuv).sum(axis=1)          # k(u_t, v_j), j <= t
    col_part = np.triu(Kuv, 1).sum(axis=0)       # k(u_i, v_t), i < t
    s_uv = np.cumsum(row_part + col_part)
    t = np.arange(1, n + 1, dtype=float)
    return np.sqrt(np.maximum((s_uu + s_vv - 2.0 * s_uv) / t ** 2, 0.0))


class MmdCS:
    """CS for the kernel MMD between the two halves of paired observations."""

    name = "mmd"
    kind = "interval"
    theta_range = (0.0, math.inf)

    def __init__(self, alpha: float, bandwidth: Optional[float] = None,
                 calibration: int = 100):
        self.alpha = _check_alpha(alpha)
        self.kernel = KernelSpec(bandwidth) if bandwidth is not None else None
        self.calibration = calibration

    def new_state(self) -> MmdCsState:
        return MmdCsState(self.alpha, self.kernel, self.calibration)

    def width(self, t):
        return mmd_gamma(t, self.alpha) + 2.0 * mmd_kappa(t, self.alpha)

    def path(self, pairs, kernel: Optional[KernelSpec] = None):
        kernel = kernel or self.kernel
        if kernel is None:
            raise ValueError("MMD path needs a kernel; pass one or fix the bandwidth")
        m = prefix_mmd(pairs, kernel)
        t = np.arange(1, m.size + 1)
        return np.maximum(m - mmd_gamma(t, self.alpha), 0.0), m + 2.0 * mmd_kappa(t, self.alpha)


FAMILIES = {
    "gaussian_mean": GaussianMeanCS,
    "bounded_mean": EmpiricalBernsteinCS,
    "cdf": KolmogorovSmirnovCS,
    "mmd": MmdCS,
}


def make_family(name: str, alpha: float, **params):
    try:
        cls = FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown CS family {name!r}; choose from {sorted(FAMILIES)}")
    return cls(alpha, **params)

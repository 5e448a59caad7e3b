"""Changepoint detectors built from confidence sequences, plus CuSum.

* :class:`FcsDetector` alarms once the forward running intersection is empty.
* :class:`BcsDetector` alarms once the forward running intersection misses
  the smallest backward set, rebuilt from the buffer every
  ``check_frequency`` steps.
* certificate solvers turn width functions into guaranteed delays.
* :class:`CusumState` / :func:`cusum2_stop` are the likelihood-ratio baseline
  in its forward-recursive and repeated-backward-test forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .sequences import (EmpiricalBernsteinCS, GaussianMeanCS, KernelSpec,
                        KolmogorovSmirnovCS, MmdCS, Sidedness, _sided_arrays,
                        apply_sidedness, make_family, median_heuristic,
                        mmd_gamma, mmd_kappa, rbf_gram, _pairs, _Growable)
from .sets import (BandEnvelope, Interval, KnownCdf, _regularize, band_feasible,
                   band_contains, cdf_band_separation, fold_band, intersect,
                   RunningIntersection)


class DetectorStopped(RuntimeError):
    pass


class UndetectableError(ValueError):
    pass


@dataclass
class DetectorConfig:
    """Settings shared by both CS detectors.

    Attributes:
        alpha: error level in (0, 1).
        family: one of ``gaussian_mean``, ``bounded_mean``, ``cdf``, ``mmd``.
        params: extra keyword arguments for the family (e.g. ``bandwidth``).
        sidedness: applied to forward sets; backward sets get the opposite
            one-sided relaxation.
        check_frequency: rebuild the backward set every this many steps.
        max_horizon: optional censoring bound used by drivers.
        theta0: known pre-change parameter.  A float for interval families or
            a CDF callable for ``cdf``.  The forward set is then the singleton.
    """

    alpha: float = 0.05
    family: str = "gaussian_mean"
    params: dict = field(default_factory=dict)
    sidedness: Sidedness = Sidedness.TWO_SIDED
    check_frequency: int = 1
    max_horizon: Optional[int] = None
    theta0: Optional[Union[float, Callable]] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.check_frequency) != self.check_frequency or self.check_frequency < 1:
            raise ValueError("check_frequency must be a positive integer")
        if self.max_horizon is not None and self.max_horizon < 1:
            raise ValueError("max_horizon must be positive")
        self.sidedness = Sidedness(self.sidedness)
        self.check_frequency = int(self.check_frequency)

    def make_family(self):
        return make_family(self.family, self.alpha, **self.params)


@dataclass
class AlarmReport:
    """Outcome of an alarm.

    ``backward_snapshots`` holds ``(lower, upper)`` arrays of ``B_t`` for
    ``t = 1..tau`` for interval families; bands are not materialised.
    """

    tau: int
    t_hat: int
    eps_hat: float
    separations: np.ndarray = field(repr=False, default=None)
    backward_snapshots: Optional[tuple] = field(repr=False, default=None)


# ---------------------------------------------------------------------------
# buffers for backward rebuilds
# ---------------------------------------------------------------------------


def nest_backward(lo, hi):
    """Turn the reversed-stream path into nested backward sets ``B_t``.

    ``lo``/``hi`` are the sets of the CS run on the reversed buffer.  Returns
    arrays indexed by ``t - 1`` with ``B_1`` (the smallest) first.
    """
    lo = np.maximum.accumulate(lo)[::-1]
    hi = np.minimum.accumulate(hi)[::-1]
    return lo, hi


class IntervalBuffer:
    """Observation buffer for interval-valued families."""

    def __init__(self, family, sidedness: Sidedness):
        self.family = family
        self.mode = Sidedness(sidedness).opposite()
        self._xs = _Growable()

    def append(self, x):
        self._xs.append(float(x))

    @property
    def n(self):
        return self._xs.n

    @property
    def values(self):
        return self._xs.view

    def reversed_path(self):
        return self.family.path(self.values[::-1])

    def backward_sets(self):
        lo, hi = self.reversed_path()
        lo, hi = _sided_arrays(lo, hi, self.mode, self.family.theta_range)
        return nest_backward(lo, hi)

    def smallest(self) -> Interval:
        lo, hi = self.reversed_path()
        lo, hi = _sided_arrays(lo, hi, self.mode, self.family.theta_range)
        a, b = float(np.max(lo)), float(np.min(hi))
        return Interval(a, b) if a <= b else Interval.empty_set()


class MmdBuffer(IntervalBuffer):
    """Paired-observation buffer keeping suffix Gram sums up to date.

    For a suffix starting at index ``i`` the arrays hold
    ``sum_{j,l >= i} k(.,.)`` for the uu, vv and uv blocks, so the reversed
    CS path is available in O(n) and each append costs O(n p).
    """

    def __init__(self, family: MmdCS, sidedness: Sidedness):
        super().__init__(family, sidedness)
        self.kernel = family.kernel
        self._fixed = family.kernel is not None
        self._u = None
        self._v = None
        self._suu = _Growable()
        self._svv = _Growable()
        self._suv = _Growable()

    def append(self, pair):
        P = _pairs(np.asarray(pair, dtype=float)[None, ...])[0]
        if self._u is None:
            self._u = _Growable(P.shape[1:])
            self._v = _Growable(P.shape[1:])
        self._u.append(P[0])
        self._v.append(P[1])
        n = self._u.n
        if not self._fixed and n <= self.family.calibration:
            U, V = self._u.view, self._v.view
            self.kernel = KernelSpec(median_heuristic(np.vstack([U, V])))
            self._recompute()
            return
        bw = self.kernel.bandwidth
        U, V = self._u.view, self._v.view
        u, v = U[-1:], V[-1:]
        ku = rbf_gram(u, U[:-1], bw)[0]
        kv = rbf_gram(v, V[:-1], bw)[0]
        kuv = rbf_gram(u, V[:-1], bw)[0]
        kvu = rbf_gram(U[:-1], v, bw)[:, 0]
        k_self = rbf_gram(u, v, bw)[0, 0]

        def rcs(a):
            return np.cumsum(a[::-1])[::-1]
        self._suu.view[:] += 2.0 * rcs(ku) + 1.0
        self._svv.view[:] += 2.0 * rcs(kv) + 1.0
        self._suv.view[:] += rcs(kuv) + rcs(kvu) + k_self
        self._suu.append(1.0)
        self._svv.append(1.0)
        self._suv.append(k_self)

    def _recompute(self):
        U, V = self._u.view, self._v.view
        bw = self.kernel.bandwidth

        def suffix_block(K):
            # suffix sums of the square block starting at each index
            n = K.shape[0]
            tot = np.cumsum(np.cumsum(K[::-1, ::-1], axis=0), axis=1)
            return tot[np.arange(n), np.arange(n)][::-1]
        for g in (self._suu, self._svv, self._suv):
            g.n = 0
        for a, b, c in zip(suffix_block(rbf_gram(U, U, bw)),
                           suffix_block(rbf_gram(V, V, bw)),
                           suffix_block(rbf_gram(U, V, bw))):
            self._suu.append(a)
            self._svv.append(b)
            self._suv.append(c)

    @property
    def n(self):
        return 0 if self._u is None else self._u.n

    @property
    def values(self):
        return np.stack([self._u.view, self._v.view], axis=1)

    def suffix_estimates(self) -> np.ndarray:
        """Plug-in MMD of the suffix starting at each buffer index."""
        n = self.n
        s = np.arange(n, 0, -1, dtype=float)
        sq = (self._suu.view + self._svv.view - 2.0 * self._suv.view) / s ** 2
        return np.sqrt(np.maximum(sq, 0.0))

    def reversed_path(self):
        m = self.suffix_estimates()[::-1]
        t = np.arange(1, m.size + 1)
        a = self.family.alpha
        return np.maximum(m - mmd_gamma(t, a), 0.0), m + 2.0 * mmd_kappa(t, a)


class BandBuffer:
    """Observation buffer for the KS family."""

    def __init__(self, family: KolmogorovSmirnovCS, sidedness: Sidedness):
        if Sidedness(sidedness) is not Sidedness.TWO_SIDED:
            raise ValueError("the CDF family is two-sided only")
        self.family = family
        self._xs = _Growable()

    def append(self, x):
        self._xs.append(float(x))

    @property
    def n(self):
        return self._xs.n

    @property
    def values(self):
        return self._xs.view

    def smallest(self) -> BandEnvelope:
        return self.family.smallest(self.values[::-1])


def make_buffer(family, sidedness):
    if isinstance(family, MmdCS):
        return MmdBuffer(family, sidedness)
    if family.kind == "band":
        return BandBuffer(family, sidedness)
    return IntervalBuffer(family, sidedness)


def backward_smallest(buffer, family, sidedness: Sidedness = Sidedness.TWO_SIDED):
    """``B_1`` for a buffer: fold the CS run on the reversed observations."""
    buf = make_buffer(family, sidedness)
    for x in buffer:
        buf.append(x)
    if buf.n == 0:
        raise ValueError("buffer is empty")
    return buf.smallest()


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def estimate_changepoint(separations) -> int:
    """Largest 1-based index attaining the maximal separation.

    NaN entries (steps where a set was empty) are ignored.
    """
    s = np.asarray(separations, dtype=float)
    if s.size == 0 or np.all(np.isnan(s)):
        raise ValueError("no separations available")
    best = np.nanmax(s)
    return int(np.nonzero(s == best)[0][-1]) + 1


def estimate_magnitude(c: Interval, b: Interval) -> float:
    """Span of the forward and backward sets at the estimated changepoint."""
    if c.empty or b.empty:
        raise ValueError("empty set has no span")
    return max(abs(c.upper - b.lower), abs(b.upper - c.lower))


def _interval_separations(clo, chi, blo, bhi):
    with np.errstate(invalid="ignore"):
        sep = np.maximum(np.maximum(blo - chi, clo - bhi), 0.0)
    sep[(clo > chi) | (blo > bhi)] = np.nan
    return sep


def _interval_spans(clo, chi, blo, bhi):
    with np.errstate(invalid="ignore"):
        return np.maximum(np.abs(chi - blo), np.abs(bhi - clo))


def _ks_rows(xs, grid, alpha, nested, reverse_time=False, block=512):
    """Yield ``(t_index, lower, upper, upper_left)`` blocks of prefix bands.

    Rows are regularised (monotone) and, when ``nested``, intersected over
    time.  With ``reverse_time`` the prefix order runs over the reversed
    sample.
    """
    from .sequences import ks_width
    xs = np.asarray(xs, dtype=float)
    if reverse_time:
        xs = xs[::-1]
    n = xs.size
    ranks = np.searchsorted(grid, xs, side="left")
    counts = np.zeros(grid.size, dtype=np.int64)
    run_lo = np.zeros(grid.size + 1)
    run_hi = np.ones(grid.size + 1)
    for b0 in range(0, n, block):
        b1 = min(n, b0 + block)
        hits = np.zeros((b1 - b0, grid.size), dtype=np.int64)
        hits[np.arange(b1 - b0), ranks[b0:b1]] = 1
        c = np.cumsum(hits, axis=0) + counts
        counts = c[-1].copy()
        t = np.arange(b0 + 1, b1 + 1, dtype=float)
        F = np.cumsum(c, axis=1) / t[:, None]
        half = (ks_width(t, alpha) / 2.0)[:, None]
        lo = np.concatenate([np.zeros((b1 - b0, 1)), np.maximum(F - half, 0.0)], axis=1)
        hi = np.concatenate([np.minimum(half, 1.0), np.minimum(F + half, 1.0)], axis=1)
        if nested:
            lo = np.maximum(np.maximum.accumulate(lo, axis=0), run_lo)
            hi = np.minimum(np.minimum.accumulate(hi, axis=0), run_hi)
            run_lo, run_hi = lo[-1].copy(), hi[-1].copy()
        feasible = np.all(np.maximum.accumulate(lo, axis=1) <= hi, axis=1)
        lo = np.maximum.accumulate(lo, axis=1)
        hi = np.minimum.accumulate(hi[:, ::-1], axis=1)[:, ::-1]
        yield np.arange(b0, b1), lo, hi, feasible


def _ks_estimates(xs, alpha, known: Optional[KnownCdf], nested=True):
    """Separations and spans between forward and backward KS sets, all t."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    grid = np.unique(xs)
    # B_t is the reversed prefix of length n + 1 - t (row index n - t)
    sep = np.full(n, np.nan)
    spans = np.full(n, np.nan)
    if known is not None:
        F = known.at(grid)
        left = np.concatenate([[0.0], F])
        right = np.concatenate([F, [1.0]])
        for idx, lo, hi, ok in _ks_rows(xs, grid, alpha, nested, reverse_time=True):
            t = n - idx                      # 1-based forward time of each row
            s = np.maximum(np.max(lo - left, axis=1), np.max(right - hi, axis=1))
            sp = np.maximum(np.max(hi - left, axis=1), np.max(right - lo, axis=1))
            sep[t - 1] = np.where(ok, np.maximum(s, 0.0), np.nan)
            spans[t - 1] = sp
        return sep, spans
    # backward rows indexed by forward time
    b_lo = np.empty((n, grid.size + 1))
    b_hi = np.empty((n, grid.size + 1))
    b_ok = np.empty(n, dtype=bool)
    for idx, lo, hi, ok in _ks_rows(xs, grid, alpha, nested, reverse_time=True):
        t = n - idx
        b_lo[t - 1], b_hi[t - 1], b_ok[t - 1] = lo, hi, ok
    for idx, lo, hi, ok in _ks_rows(xs, grid, alpha, nested):
        blo, bhi, bok = b_lo[idx], b_hi[idx], b_ok[idx]
        s = np.maximum(np.max(lo - bhi, axis=1), np.max(blo - hi, axis=1))
        sp = np.maximum(np.max(hi - blo, axis=1), np.max(bhi - lo, axis=1))
        good = ok & bok
        sep[idx] = np.where(good, np.maximum(s, 0.0), np.nan)
        spans[idx] = sp
    return sep, spans


# ---------------------------------------------------------------------------
# detectors
# ---------------------------------------------------------------------------


class _CsDetector:
    def __init__(self, config: DetectorConfig):
        self.config = config
        self.family = config.make_family()
        self.kind = self.family.kind
        self.known = config.theta0 is not None
        self.buffer = make_buffer(self.family, config.sidedness)
        self.n = 0
        self.report: Optional[AlarmReport] = None
        self.forward_running = RunningIntersection()
        self._fwd_lo = []
        self._fwd_hi = []
        if self.known:
            if self.kind == "band":
                if not callable(config.theta0):
                    raise ValueError("known pre-change law for the CDF family must be a CDF callable")
                self._point = KnownCdf(config.theta0)
            else:
                th = float(config.theta0)
                self._point = Interval(th, th)
            self.forward_state = None
        else:
            self.forward_state = self.family.new_state()

    @property
    def alarmed(self) -> bool:
        return self.report is not None

    @property
    def forward_set(self):
        """Current forward set: the running intersection or the known value."""
        return self._point if self.known else self.forward_running.current

    def _advance_forward(self, x):
        if self.known:
            if self.kind != "band":
                self._fwd_lo.append(self._point.lower)
                self._fwd_hi.append(self._point.upper)
            return
        raw = self.forward_state.update(x)
        if self.kind == "band":
            self.forward_running.fold(raw)
            return
        raw = apply_sidedness(raw, self.config.sidedness, self.family.theta_range)
        cur = self.forward_running.fold(raw)
        self._fwd_lo.append(cur.lower)
        self._fwd_hi.append(cur.upper)

    def step(self, x) -> Optional[AlarmReport]:
        if self.alarmed:
            raise DetectorStopped("detector stopped")
        self.buffer.append(x)
        self.n += 1
        self._advance_forward(x)
        if self._check():
            self.report = self._build_report()
            return self.report
        return None

    def run(self, xs, horizon: Optional[int] = None) -> Optional[AlarmReport]:
        """Feed observations until an alarm, the horizon or the end of ``xs``."""
        horizon = horizon or self.config.max_horizon
        for i, x in enumerate(xs):
            if horizon is not None and i >= horizon:
                break
            rep = self.step(x)
            if rep is not None:
                return rep
        return None

    # estimators -----------------------------------------------------------

    def backward_sweep(self):
        """All backward sets ``B_t^{(n)}``, ``t = 1..n`` (interval families)."""
        return self.buffer.backward_sets()

    def _build_report(self) -> AlarmReport:
        tau = self.n
        if self.kind == "band":
            xs = self.buffer.values
            known = self._point if self.known else None
            sep, spans = _ks_estimates(xs, self.config.alpha, known)
            if np.all(np.isnan(sep)):
                sep, spans = _ks_estimates(xs, self.config.alpha, known, nested=False)
                sep = np.where(np.isnan(sep), 0.0, sep)
            t_hat = estimate_changepoint(sep)
            return AlarmReport(tau, t_hat, float(spans[t_hat - 1]), sep, None)
        clo, chi = np.array(self._fwd_lo), np.array(self._fwd_hi)
        blo, bhi = self.backward_sweep()
        sep = _interval_separations(clo, chi, blo, bhi)
        if np.all(np.isnan(sep)):
            clo, chi, blo, bhi = self._raw_sets()
            sep = _interval_separations(clo, chi, blo, bhi)
            sep = np.where(np.isnan(sep), 0.0, sep)
        t_hat = estimate_changepoint(sep)
        i = t_hat - 1
        # one of the two sets can still be empty under the raw fallback
        a, b = (clo[i], chi[i]), (blo[i], bhi[i])
        eps = float(_interval_spans(*a, *b)) if a[0] <= a[1] and b[0] <= b[1] else 0.0
        return AlarmReport(tau, t_hat, eps, sep, (blo, bhi))

    def _raw_sets(self):
        fam, mode = self.family, self.config.sidedness
        if self.known:
            clo, chi = np.array(self._fwd_lo), np.array(self._fwd_hi)
        elif isinstance(fam, MmdCS):
            clo, chi = fam.path(self.buffer.values, self.buffer.kernel)
            clo, chi = _sided_arrays(clo, chi, mode, fam.theta_range)
        else:
            clo, chi = fam.path(self.buffer.values)
            clo, chi = _sided_arrays(clo, chi, mode, fam.theta_range)
        rlo, rhi = self.buffer.reversed_path()
        rlo, rhi = _sided_arrays(rlo, rhi, mode.opposite(), fam.theta_range)
        return clo, chi, rlo[::-1], rhi[::-1]


class FcsDetector(_CsDetector):
    """Alarm when the forward running intersection becomes empty."""

    def __init__(self, config: DetectorConfig):
        if config.theta0 is not None:
            raise ValueError("the forward-only detector needs an unknown pre-change parameter")
        super().__init__(config)

    def _check(self) -> bool:
        cur = self.forward_running.current
        if self.kind == "band":
            return not band_feasible(cur)
        return cur.empty


class BcsDetector(_CsDetector):
    """Alarm when the forward and smallest backward sets are disjoint."""

    def _check(self) -> bool:
        if self.n < 2 or self.n % self.config.check_frequency:
            return False
        back = self.buffer.smallest()
        if self.kind == "band":
            if not band_feasible(back):
                return True
            if self.known:
                return not band_contains(back, self._point.cdf)
            fwd = self.forward_running.current
            return not band_feasible(fold_band(fwd, back))
        fwd = self.forward_set
        return intersect(fwd, back).empty


def make_detector(config: DetectorConfig, kind: str = "bcs"):
    if kind == "bcs":
        return BcsDetector(config)
    if kind == "fcs":
        return FcsDetector(config)
    raise ValueError(f"unknown detector kind {kind!r}")


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


SCAN_BOUND = 10 ** 9
_DENSE_LIMIT = 1 << 22


@dataclass(frozen=True)
class DelayCertificate:
    """Smallest sample count certifying a separation of ``delta``.

    ``u0`` is a pre-change-uncertain certificate; with ``known_pre_change``
    it is the known-pre-change count (often written ``t0``).
    """

    u0: int
    delta: float
    T: Optional[int]
    alpha: Optional[float] = None
    known_pre_change: bool = False


def _first_true(pred, start: int = 1, bound: int = SCAN_BOUND) -> Optional[int]:
    """Smallest integer ``t >= start`` with ``pred(t)`` true.

    ``pred`` is vectorised.  Dense block scan up to a few million, then
    galloping and bisection, which assumes ``pred`` is monotone there.
    """
    lo = start
    size = 4096
    while lo <= min(bound, _DENSE_LIMIT):
        hi = min(lo + size, bound + 1, _DENSE_LIMIT + 1)
        t = np.arange(lo, hi, dtype=np.int64)
        ok = np.asarray(pred(t), dtype=bool)
        if ok.any():
            return int(t[np.argmax(ok)])
        lo = hi
        size *= 2
    if lo > bound:
        return None
    last_false, probe = lo - 1, lo
    while probe <= bound and not bool(pred(np.array([probe]))[0]):
        last_false, probe = probe, min(2 * probe, probe + _DENSE_LIMIT * 64)
    if probe > bound:
        if bool(pred(np.array([bound]))[0]):
            probe = bound
        else:
            return None
    a, b = last_false, probe
    while b - a > 1:
        mid = (a + b) // 2
        if bool(pred(np.array([mid]))[0]):
            b = mid
        else:
            a = mid
    return b


def _scalar_width(width_fn, t) -> float:
    return float(np.asarray(width_fn(np.array([t])), dtype=float).ravel()[0])


def solve_u0(width_post, width_pre, T, delta, alpha=None) -> DelayCertificate:
    """Smallest ``t`` with ``width_post(t) + width_pre(T) < delta``."""
    if not delta > 0:
        raise ValueError("no separation: delta must be positive")
    pre = 0.0 if width_pre is None else _scalar_width(width_pre, T)

    def pred(t):
        return np.asarray(width_post(t), dtype=float) + pre < delta
    t = _first_true(pred)
    if t is None:
        raise UndetectableError(
            f"undetectable at this delta={delta}, T={T}, alpha={alpha}")
    return DelayCertificate(t, float(delta), T, alpha, width_pre is None)


def solve_t0(width_post, delta, alpha=None) -> DelayCertificate:
    """Known-pre-change certificate: smallest ``t`` with ``width_post(t) < delta``."""
    return solve_u0(width_post, None, None, delta, alpha)


def fcs_delay_certificate(width_fn, T: int, theta0: float, theta1: float) -> int:
    """Smallest ``t - T`` with ``w(t) + w(T) <= ((t - T) / t) * |theta1 - theta0|``."""
    delta = abs(float(theta1) - float(theta0))
    wT = _scalar_width(width_fn, T)
    if not delta > wT:
        raise UndetectableError("change not certifiably detectable: delta <= w(T)")

    def pred(d):
        t = T + np.asarray(d, dtype=np.int64)
        return np.asarray(width_fn(t), dtype=float) + wT <= (t - T) / t * delta
    d = _first_true(pred)
    if d is None:
        raise UndetectableError("change not certifiably detectable within the scan bound")
    return d


def family_width(family, variance: Optional[float] = None):
    """Deterministic full-width function for a family, for certificates."""
    if isinstance(family, EmpiricalBernsteinCS):
        if variance is None:
            raise ValueError("bounded_mean certificates need a variance for the width proxy")
        return family.width_proxy(variance)
    return family.width


# ---------------------------------------------------------------------------
# CuSum baseline
# ---------------------------------------------------------------------------


def gaussian_log_lr(x, mu0: float, mu1: float):
    """log f1(x)/f0(x) for unit-variance normals with means mu1, mu0."""
    x = np.asarray(x, dtype=float)
    return (mu1 - mu0) * x - (mu1 ** 2 - mu0 ** 2) / 2.0


@dataclass
class CusumState:
    """Log-domain CuSum statistic.

    ``W_1 = 0`` and ``W_n = max_t prod_{i=t+1}^n LR(X_i)`` over ``1 <= t <= n``,
    which obeys ``W_n = max(1, max(W_{n-1}, 1) * LR(X_n))``.
    """

    mu0: float = 0.0
    mu1: float = 1.0
    alpha: float = 0.05
    threshold: Optional[float] = None
    log_w: float = -math.inf
    n: int = 0

    def __post_init__(self):
        if self.threshold is None:
            self.threshold = 1.0 / self.alpha
        if not self.threshold > 1:
            raise ValueError("threshold must exceed 1")

    @property
    def w(self) -> float:
        return math.exp(self.log_w)

    def update(self, x) -> bool:
        """Add one observation; return True when ``W_n >= threshold``."""
        self.n += 1
        if self.n > 1:
            ell = float(gaussian_log_lr(x, self.mu0, self.mu1))
            self.log_w = max(0.0, max(self.log_w, 0.0) + ell)
        return self.log_w >= math.log(self.threshold)


def cusum_stop(stream, mu0=0.0, mu1=1.0, threshold=None, alpha=0.05) -> Optional[int]:
    st = CusumState(mu0, mu1, alpha, threshold)
    for i, x in enumerate(stream, start=1):
        if st.update(x):
            return i
    return None


def cusum_brute_force(stream, mu0=0.0, mu1=1.0) -> np.ndarray:
    """``log W_n`` for every ``n`` straight from the max-over-t definition."""
    ell = gaussian_log_lr(stream, mu0, mu1)
    out = np.empty(ell.size)
    for n in range(1, ell.size + 1):
        if n == 1:
            out[0] = -math.inf
            continue
        # t = 1..n, product over i = t+1..n (0-based ell[t:n])
        out[n - 1] = max(float(np.sum(ell[t:n])) for t in range(1, n + 1))
    return out


def cusum2_stop(stream, mu0=0.0, mu1=1.0, threshold=None, alpha=0.05) -> Optional[int]:
    """Stopping time of repeated backward power-one tests.

    At each ``n`` the suffix products ``L_t^n`` are checked against the
    threshold; suffixes start at index 2 or later, matching ``W_1 = 0``.
    """
    b = 1.0 / alpha if threshold is None else threshold
    if not b > 1:
        raise ValueError("threshold must exceed 1")
    log_b = math.log(b)
    ell = gaussian_log_lr(stream, mu0, mu1)
    for n in range(1, ell.size + 1):
        # L_t^n over t = 1..n-1 (suffixes not containing the first draw)
        tails = np.cumsum(ell[1:n][::-1])
        if tails.size and tails.max() >= log_b:
            return n
    return None

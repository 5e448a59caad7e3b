import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from csdetect.sets import (BandEnvelope, CdfBand, Interval, KnownCdf, RunningIntersection,
                           band_contains, band_feasible, band_separation, band_span,
                           cdf_band_separation, cdf_band_span, fold_band, intersect,
                           is_empty, separation, set_span, span)

STEP = 0.02
LEVELS = np.round(np.arange(0, 51) * STEP, 10)


def test_interval_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    assert Interval.empty_set().empty


def test_intersect_basic():
    assert intersect(Interval(0, 2), Interval(1, 3)) == Interval(1, 2)
    assert intersect(Interval(0, 1), Interval(2, 3)).empty
    assert intersect(Interval(0, 1), Interval(1, 3)) == Interval(1, 1)


def test_span_example():
    assert span(Interval(0.2, 0.4), Interval(0.7, 0.9)) == pytest.approx(0.7)


def test_span_identical_sets_is_diameter():
    assert span(Interval(0.1, 0.6), Interval(0.1, 0.6)) == pytest.approx(0.5)


def test_span_errors():
    with pytest.raises(ValueError):
        span(Interval.empty_set(), Interval(0, 1))
    with pytest.raises(ValueError):
        span(Interval.real_line(), Interval(0, 1))


def test_interval_separation():
    assert separation(Interval(0, 1), Interval(2, 3)) == 1.0
    assert separation(Interval(0, 2), Interval(1, 3)) == 0.0
    with pytest.raises(ValueError):
        separation(Interval.empty_set(), Interval(0, 1))


def test_running_intersection_folds():
    r = RunningIntersection(history=[])
    for s in (Interval(0, 5), Interval(1, 6), Interval(-1, 4)):
        r.fold(s)
    assert r.current == Interval(1, 4)
    assert r.count == 3
    assert [h.lower for h in r.history] == [0, 1, 1]


def test_band_feasible_example():
    env = BandEnvelope([0.0, 1.0], [0.8, 0.1], [0.9, 0.5])
    assert not band_feasible(env)
    assert band_feasible(BandEnvelope([0.0, 1.0], [0.1, 0.4], [0.5, 0.9]))


def test_cdf_band_from_samples():
    b = CdfBand.from_samples([3.0, 1.0, 1.0, 2.0], 0.1)
    np.testing.assert_allclose(b.breakpoints, [1, 2, 3])
    np.testing.assert_allclose(b.empirical_cdf, [0.5, 0.75, 1.0])
    np.testing.assert_allclose(b.lower, [0.4, 0.65, 0.9])
    np.testing.assert_allclose(b.upper, [0.6, 0.85, 1.0])
    assert b.envelope().upper_left == pytest.approx(0.1)


def test_cdf_band_validation():
    with pytest.raises(ValueError):
        CdfBand(np.array([1.0, 0.5]), np.array([0.2, 0.4]), 0.1)
    with pytest.raises(ValueError):
        CdfBand(np.array([0.0, 1.0]), np.array([0.6, 0.4]), 0.1)


# --- brute-force oracles on a 0.02 value lattice ---------------------------


def _cells(env):
    """(lower, upper) per cell: left region first, then each breakpoint."""
    lo = [0.0] + list(env.lower)
    hi = [env.upper_left] + list(env.upper)
    return lo, hi


def _reachable(env):
    """Lattice values a nondecreasing CDF can take in each cell."""
    lo, hi = _cells(env)
    m = len(lo)
    ok = [[lo[j] - 1e-12 <= v <= hi[j] + 1e-12 for v in LEVELS] for j in range(m)]
    fwd = [ok[0][:]]
    for j in range(1, m):
        seen = False
        row = []
        for k in range(len(LEVELS)):
            seen = seen or fwd[-1][k]
            row.append(ok[j][k] and seen)
        fwd.append(row)
    out = [None] * m
    out[-1] = fwd[-1]
    for j in range(m - 2, -1, -1):
        row = []
        for k in range(len(LEVELS)):
            later = any(out[j + 1][k2] for k2 in range(k, len(LEVELS)))
            row.append(fwd[j][k] and later)
        out[j] = row
    return out


def brute_feasible(env):
    return any(_reachable(env)[-1])


def brute_pair_distances(a, b):
    """All sup-distances between lattice CDFs of two bands on a shared grid."""
    ra, rb = _reachable(a), _reachable(b)
    m = len(ra)
    la = [[LEVELS[k] for k in range(len(LEVELS)) if ra[j][k]] for j in range(m)]
    lb = [[LEVELS[k] for k in range(len(LEVELS)) if rb[j][k]] for j in range(m)]
    return la, lb


lattice = hs.integers(0, 50).map(lambda k: round(k * STEP, 10))


@hs.composite
def lattice_band(draw, n=None):
    n = n if n is not None else draw(hs.integers(1, 5))
    lo = [draw(lattice) for _ in range(n)]
    hi = [draw(lattice) for _ in range(n)]
    ul = draw(lattice)
    return BandEnvelope(np.arange(n, dtype=float), lo, hi, ul)


@settings(max_examples=300, deadline=None)
@given(lattice_band())
def test_band_feasible_matches_brute_force(env):
    assert band_feasible(env) == brute_feasible(env)


@settings(max_examples=150, deadline=None)
@given(hs.integers(1, 4).flatmap(lambda n: hs.tuples(lattice_band(n), lattice_band(n))))
def test_band_separation_matches_brute_force(pair):
    a, b = pair
    if not (brute_feasible(a) and brute_feasible(b)):
        with pytest.raises(ValueError):
            band_separation(a, b)
        return
    # ranges of attainable values per cell are intervals; the distance between
    # two monotone families is the worst cell gap (value ranges are checked by
    # the brute-force reachability lattice)
    la, lb = brute_pair_distances(a, b)
    gap = max(max(min(x) - max(y), min(y) - max(x), 0.0) for x, y in zip(la, lb))
    assert band_separation(a, b) == pytest.approx(gap, abs=1e-9)
    widest = max(max(max(x) - min(y), max(y) - min(x)) for x, y in zip(la, lb))
    assert band_span(a, b) == pytest.approx(widest, abs=1e-9)


def _clamp_pair_distance(a, b, d):
    """Whether monotone lattice CDFs F in a, G in b exist with sup|F-G| <= d."""
    ra, rb = _reachable(a), _reachable(b)
    m = len(ra)
    states = {(i, k) for i in range(len(LEVELS)) for k in range(len(LEVELS))
              if ra[0][i] and rb[0][k] and abs(LEVELS[i] - LEVELS[k]) <= d + 1e-9}
    for j in range(1, m):
        nxt = set()
        for i in range(len(LEVELS)):
            if not ra[j][i]:
                continue
            for k in range(len(LEVELS)):
                if rb[j][k] and abs(LEVELS[i] - LEVELS[k]) <= d + 1e-9:
                    if any(i0 <= i and k0 <= k for i0, k0 in states):
                        nxt.add((i, k))
        states = nxt
        if not states:
            return False
    return bool(states)


@settings(max_examples=40, deadline=None)
@given(hs.integers(1, 3).flatmap(lambda n: hs.tuples(lattice_band(n), lattice_band(n))))
def test_band_separation_is_attained_by_a_pair(pair):
    a, b = pair
    if not (band_feasible(a) and band_feasible(b)):
        return
    d = band_separation(a, b)
    assert _clamp_pair_distance(a, b, d)
    if d >= STEP:
        assert not _clamp_pair_distance(a, b, d - STEP)


def test_fold_band_is_pointwise_intersection():
    a = CdfBand.from_samples([0.0, 1.0], 0.2)
    b = CdfBand.from_samples([0.5], 0.1)
    env = fold_band(a.envelope(), b)
    np.testing.assert_allclose(env.breakpoints, [0.0, 0.5, 1.0])
    # a: [0.3,0.7] on [0,1), [0.8,1] after; b: upper 0.1 left of 0.5, [0.9,1] after
    np.testing.assert_allclose(env.lower, [0.3, 0.9, 0.9])
    np.testing.assert_allclose(env.upper, [0.1, 0.7, 1.0])
    assert env.upper_left == pytest.approx(0.1)
    assert not band_feasible(env)


def test_band_contains_continuous_cdf():
    x = np.linspace(0.01, 0.99, 99)
    band = CdfBand.from_samples(x, 0.05)
    assert band_contains(band, lambda z: np.clip(z, 0, 1))
    assert not band_contains(band, lambda z: np.clip(z, 0, 1) ** 3)


def test_known_cdf_separation_against_dense_oracle():
    rng = np.random.default_rng(3)
    band = CdfBand.from_samples(rng.random(30) * 0.5, 0.1)
    point = KnownCdf(lambda z: np.clip(z, 0, 1))
    grid = np.linspace(-0.5, 1.5, 200001)
    lo, hi = band.envelope().on_grid(grid)
    lo = np.maximum.accumulate(lo)
    hi = np.minimum.accumulate(hi[::-1])[::-1]
    F = point.at(grid)
    dense_sep = max(np.max(lo - F), np.max(F - hi), 0.0)
    dense_span = max(np.max(hi - F), np.max(F - lo))
    assert cdf_band_separation(point, band) == pytest.approx(dense_sep, abs=1e-4)
    assert cdf_band_span(point, band) == pytest.approx(dense_span, abs=1e-4)
    assert separation(point, band) == cdf_band_separation(point, band)
    assert set_span(band, point) == cdf_band_span(point, band)


def test_is_empty_dispatch():
    assert is_empty(Interval.empty_set())
    assert not is_empty(Interval(0, 1))
    assert is_empty(BandEnvelope([0.0, 1.0], [0.8, 0.1], [0.9, 0.5]))
    assert not is_empty(KnownCdf(lambda z: z))

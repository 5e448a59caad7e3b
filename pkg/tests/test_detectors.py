import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from csdetect.detectors import (BcsDetector, CusumState, DetectorConfig, DetectorStopped,
                                FcsDetector, IntervalBuffer, MmdBuffer, UndetectableError,
                                backward_smallest, cusum2_stop, cusum_brute_force,
                                cusum_stop, estimate_changepoint, estimate_magnitude,
                                fcs_delay_certificate, gaussian_log_lr, solve_t0, solve_u0)
from csdetect.sequences import (EmpiricalBernsteinCS, GaussianMeanCS, KernelSpec,
                                KolmogorovSmirnovCS, MmdCS, Sidedness, gaussian_width,
                                prefix_mmd)
from csdetect.sets import Interval, RunningIntersection
from csdetect import streams as st


def gaussian_cfg(**kw):
    return DetectorConfig(**kw)


def test_config_validation():
    for bad in ({"alpha": 0.0}, {"alpha": 1.0}, {"check_frequency": 0},
                {"check_frequency": 1.5}, {"max_horizon": 0}):
        with pytest.raises(ValueError):
            DetectorConfig(**bad)


def test_fcs_forced_disjointness(scripted_family):
    det = FcsDetector(DetectorConfig(family=scripted_family))
    rep = det.run(np.zeros(20))
    assert rep.tau == 5
    assert 1 <= rep.t_hat <= rep.tau


def test_step_after_alarm_rejected(scripted_family):
    det = FcsDetector(DetectorConfig(family=scripted_family))
    det.run(np.zeros(20))
    with pytest.raises(DetectorStopped):
        det.step(0.0)


def test_bcs_single_observation_never_alarms():
    det = BcsDetector(gaussian_cfg())
    assert det.step(100.0) is None
    assert backward_smallest([100.0], GaussianMeanCS(0.05)) == Interval.real_line()


def test_backward_single_element_equals_forward():
    fam = EmpiricalBernsteinCS(0.05)
    assert backward_smallest([0.3], fam) == fam.new_state().update(0.3)


def _forward_running(fam, xs):
    st_ = fam.new_state()
    r = RunningIntersection()
    out = []
    for x in xs:
        out.append(r.fold(st_.update(x).clip(*fam.theta_range)))
    return out


def test_palindrome_backward_equals_forward():
    rng = np.random.default_rng(0)
    half = rng.random(20)
    xs = np.concatenate([half, half[::-1]])
    for fam in (GaussianMeanCS(0.05), EmpiricalBernsteinCS(0.05)):
        fwd = _forward_running(fam, xs)[-1]
        back = backward_smallest(xs, fam)
        assert back.lower == pytest.approx(fwd.lower, abs=1e-12)
        assert back.upper == pytest.approx(fwd.upper, abs=1e-12)


def test_constant_zero_buffer_symmetric():
    fam = GaussianMeanCS(0.05)
    xs = np.zeros(100)
    back = backward_smallest(xs, fam)
    fwd = _forward_running(fam, xs)[-1]
    assert back.lower == -back.upper
    assert back == fwd
    assert back.upper == pytest.approx(float(gaussian_width(100, 0.05)) / 2)


@settings(max_examples=40, deadline=None)
@given(hs.lists(hs.floats(0, 1), min_size=1, max_size=30), hs.sampled_from(["g", "eb"]))
def test_reversal_identity(xs, which):
    fam = GaussianMeanCS(0.1) if which == "g" else EmpiricalBernsteinCS(0.1)
    buf = IntervalBuffer(fam, Sidedness.TWO_SIDED)
    for x in xs:
        buf.append(x)
    blo, bhi = buf.backward_sets()
    fwd = _forward_running(fam, xs[::-1])
    n = len(xs)
    for t in range(1, n + 1):
        # B_t uses X_t..X_n, i.e. the reversed prefix of length n + 1 - t
        f = fwd[n - t]
        assert blo[t - 1] == pytest.approx(f.lower, abs=1e-12)
        assert bhi[t - 1] == pytest.approx(f.upper, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(hs.lists(hs.floats(0, 1), min_size=2, max_size=40))
def test_nestedness(xs):
    for fam in (GaussianMeanCS(0.05), EmpiricalBernsteinCS(0.05)):
        fwd = _forward_running(fam, xs)
        for a, b in zip(fwd, fwd[1:]):
            assert b.empty or (a.lower <= b.lower and b.upper <= a.upper)
        buf = IntervalBuffer(fam, Sidedness.TWO_SIDED)
        for x in xs:
            buf.append(x)
        blo, bhi = buf.backward_sets()
        # B_1 is the smallest; sets grow with t
        assert np.all(np.diff(blo) <= 0) and np.all(np.diff(bhi) >= 0)


def test_mmd_buffer_matches_quadratic_oracle():
    rng = np.random.default_rng(4)
    pairs = rng.normal(size=(60, 2, 3))
    pairs[30:, 1] += 1.0
    fam = MmdCS(0.05, bandwidth=2.0)
    buf = MmdBuffer(fam, Sidedness.TWO_SIDED)
    for p in pairs:
        buf.append(p)
    got = buf.suffix_estimates()[::-1]
    want = prefix_mmd(pairs[::-1], KernelSpec(2.0))
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_mmd_buffer_calibration_matches_forward_kernel():
    rng = np.random.default_rng(6)
    pairs = rng.normal(size=(120, 2, 2))
    fam = MmdCS(0.05)
    buf = MmdBuffer(fam, Sidedness.TWO_SIDED)
    st_ = fam.new_state()
    for p in pairs:
        buf.append(p)
        st_.update(p)
    assert buf.kernel == st_.kernel
    want = prefix_mmd(pairs[::-1], buf.kernel)
    np.testing.assert_allclose(buf.suffix_estimates()[::-1], want, rtol=1e-10)


def test_estimate_changepoint_examples():
    assert estimate_changepoint([0, 0, 3, 0]) == 3
    assert estimate_changepoint([0, 2, 0, 2]) == 4
    assert estimate_changepoint([np.nan, 1.0, np.nan]) == 2
    with pytest.raises(ValueError):
        estimate_changepoint([np.nan])


def test_estimate_magnitude_examples():
    assert estimate_magnitude(Interval(0, 1), Interval(2, 3)) == 3
    assert estimate_magnitude(Interval(0.2, 0.7), Interval(0.2, 0.7)) == pytest.approx(0.5)


def test_bcs_report_invariants_gaussian():
    x = st.gen_gaussian(st.StreamSpec("gaussian_mean", 0, 1.0, 300, 2000, seed=11))
    rep = BcsDetector(gaussian_cfg(alpha=0.05)).run(x)
    assert rep is not None and 1 <= rep.t_hat <= rep.tau
    assert rep.eps_hat >= 0
    blo, bhi = rep.backward_snapshots
    assert len(blo) == rep.tau


def test_check_frequency_never_earlier():
    for seed in range(15):
        x = st.gen_gaussian(st.StreamSpec("gaussian_mean", 0, 0.8, 200, 3000, seed=seed))
        t1 = BcsDetector(gaussian_cfg(alpha=0.05)).run(x)
        t7 = BcsDetector(gaussian_cfg(alpha=0.05, check_frequency=7)).run(x)
        assert t1 is not None and t7 is not None
        assert t7.tau >= t1.tau
        assert t7.tau % 7 == 0


def test_known_theta0_singleton_forward():
    det = BcsDetector(gaussian_cfg(theta0=0.0))
    assert det.forward_set == Interval(0.0, 0.0)
    x = st.gen_gaussian(st.StreamSpec("gaussian_mean", 0, 1.0, 100, 2000, seed=1))
    rep = det.run(x)
    assert rep is not None and rep.tau > 1


def test_fcs_rejects_known_theta0():
    with pytest.raises(ValueError):
        FcsDetector(gaussian_cfg(theta0=0.0))


def test_ks_detector_alarms_and_estimates():
    spec = st.StreamSpec("t_location_scale", 0, 1.5, 150, 1500, seed=3)
    x = st.gen_t_stream(spec)
    rep = BcsDetector(DetectorConfig(alpha=0.05, family="cdf", check_frequency=5)).run(x)
    assert rep is not None and rep.tau > 150
    assert 1 <= rep.t_hat <= rep.tau and 0 <= rep.eps_hat <= 1
    known = BcsDetector(DetectorConfig(alpha=0.05, family="cdf", check_frequency=5,
                                       theta0=st.t_dists(0.0)[0].cdf)).run(x)
    assert known is not None and known.tau > 150 and 0 <= known.eps_hat <= 1


def test_ks_rejects_one_sided():
    with pytest.raises(ValueError):
        BcsDetector(DetectorConfig(family="cdf", sidedness="upper_only"))


def test_one_sided_risk_detector():
    spec = st.StreamSpec("classifier_risk", 0.0, math.pi / 2, 200, 3000, seed=2)
    x = st.gen_risk_stream(spec)
    rep = BcsDetector(DetectorConfig(alpha=0.05, family="bounded_mean",
                                     sidedness="upper_only")).run(x)
    assert rep is not None and rep.tau > 200
    blo, bhi = rep.backward_snapshots
    assert np.all(bhi == 1.0)


def test_mmd_detector_runs():
    # a very large shift drives the population MMD close to its ceiling
    spec = st.StreamSpec("paired_mvn", 0, 10.0, 300, 2500, seed=1)
    x = st.gen_paired_mvn(spec)
    rep = BcsDetector(DetectorConfig(alpha=0.1, family="mmd", check_frequency=10)).run(x)
    assert rep is not None and rep.tau > 300
    assert 1 <= rep.t_hat <= rep.tau


# --- certificates ---------------------------------------------------------


def linear_scan(width_post, pre, delta, bound=10 ** 6):
    for t in range(1, bound):
        if float(width_post(t)) + pre < delta:
            return t
    return None


def test_u0_zero_widths():
    zero = lambda t: np.zeros(np.shape(t))
    assert solve_u0(zero, zero, 10, 0.1).u0 == 1


def test_u0_gaussian_example():
    fam = GaussianMeanCS(0.05)
    cert = solve_u0(fam.width, fam.width, 100, 2.0, 0.05)
    pre = float(fam.width(100))
    assert cert.u0 == linear_scan(fam.width, pre, 2.0) == 43


def test_t0_is_u0_without_pre():
    fam = GaussianMeanCS(0.05)
    assert solve_t0(fam.width, 0.5).u0 == linear_scan(fam.width, 0.0, 0.5)


def test_u0_monotone_in_delta():
    fam = GaussianMeanCS(0.05)
    u = [solve_u0(fam.width, fam.width, 100, d).u0 for d in (1, 2, 4, 8)]
    assert all(a >= b for a, b in zip(u, u[1:]))


def test_u0_tail_search_agrees_with_bisection():
    fam = GaussianMeanCS(0.05)
    cert = solve_t0(fam.width, 0.003)
    t = cert.u0
    assert t > (1 << 22)
    assert fam.width(t) < 0.003 <= fam.width(t - 1)


def test_u0_errors():
    fam = GaussianMeanCS(0.05)
    with pytest.raises(ValueError):
        solve_u0(fam.width, fam.width, 100, 0.0)
    with pytest.raises(UndetectableError):
        solve_u0(fam.width, fam.width, 100, 0.5 * float(fam.width(100)))
    const = lambda t: np.ones(np.shape(t))
    with pytest.raises(UndetectableError):
        solve_t0(const, 0.5)


def test_u0_strict_inequality_tie():
    w = lambda t: np.where(np.asarray(t) >= 5, 1.0, 10.0)
    with pytest.raises(UndetectableError):
        solve_t0(w, 1.0)
    assert solve_t0(w, 1.0 + 1e-9).u0 == 5


def test_fcs_certificate_zero_width():
    zero = lambda t: np.zeros(np.shape(t))
    assert fcs_delay_certificate(zero, 100, 0.0, 1.0) == 1


def test_fcs_certificate_grows_with_T():
    fam = GaussianMeanCS(0.05)
    a = fcs_delay_certificate(fam.width, 10 ** 4, 0.0, 1.0)
    b = fcs_delay_certificate(fam.width, 10 ** 6, 0.0, 1.0)
    assert a < b < 100 * a


def test_fcs_certificate_precondition():
    fam = GaussianMeanCS(0.05)
    with pytest.raises(UndetectableError):
        fcs_delay_certificate(fam.width, 10, 0.0, 1.0)


def test_fcs_delay_within_certificate():
    fam = GaussianMeanCS(0.05)
    cert = fcs_delay_certificate(fam.width, 100, 0.0, 1.0)
    ok = 0
    for seed in range(200):
        x = st.gen_gaussian(st.StreamSpec("gaussian_mean", 0, 1.0, 100, 100 + 3 * cert, seed=seed))
        rep = FcsDetector(gaussian_cfg(alpha=0.05)).run(x)
        ok += rep is not None and rep.tau > 100 and rep.tau - 100 <= cert
    assert ok >= 190


# --- CuSum -----------------------------------------------------------------


def test_cusum_first_statistic_zero():
    s = CusumState(0, 1, alpha=0.05)
    assert s.update(100.0) is False
    assert s.w == 0.0


def test_cusum_two_step_example():
    s = CusumState(0, 1, alpha=0.05)
    s.update(2.0)
    s.update(2.0)
    assert s.w == pytest.approx(math.exp(1.5))


@settings(max_examples=200, deadline=None)
@given(hs.lists(hs.integers(-64, 64).map(lambda k: k / 16), min_size=1, max_size=50))
def test_cusum_recursion_equals_brute_force_dyadic(xs):
    # dyadic data and mu in {0, 1}: every partial sum is exact in floating point
    s = CusumState(0.0, 1.0, alpha=0.05)
    got = []
    for x in xs:
        s.update(x)
        got.append(s.log_w)
    assert got == list(cusum_brute_force(xs, 0.0, 1.0))


def test_cusum_recursion_equals_brute_force_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        xs = rng.normal(0.3, 1, rng.integers(1, 51))
        s = CusumState(0.0, 0.7, alpha=0.05)
        got = []
        for x in xs:
            s.update(x)
            got.append(s.log_w)
        np.testing.assert_allclose(np.exp(got), np.exp(cusum_brute_force(xs, 0.0, 0.7)),
                                   rtol=1e-12)


def test_cusum_equals_cusum2():
    rng = np.random.default_rng(1)
    stops = 0
    for _ in range(200):
        n = int(rng.integers(1, 501))
        T = int(rng.integers(1, n + 1))
        xs = np.concatenate([rng.normal(0, 1, T), rng.normal(1, 1, n - T)])
        a = cusum_stop(xs, 0.0, 1.0, alpha=0.01)
        b = cusum2_stop(xs, 0.0, 1.0, alpha=0.01)
        assert a == b
        stops += a is not None
    assert stops > 50


def test_cusum_textbook_recursion_same_stops():
    # W_n = max(W_{n-1}, 1) * LR(X_n) gives the same stopping times for b > 1
    rng = np.random.default_rng(2)
    for _ in range(100):
        xs = rng.normal(0.5, 1, 300)
        lb = math.log(20)
        logw, stop = -math.inf, None
        for n, x in enumerate(xs, start=1):
            if n > 1:
                logw = max(logw, 0.0) + float(gaussian_log_lr(x, 0, 1))
            if logw >= lb:
                stop = n
                break
        assert stop == cusum_stop(xs, 0, 1, alpha=0.05)


def test_cusum_single_huge_observation():
    xs = [0.0, 0.0, 50.0, 0.0]
    assert cusum_stop(xs, 0, 1, alpha=0.05) == 3
    assert cusum2_stop(xs, 0, 1, alpha=0.05) == 3


def test_cusum_equal_densities_never_stop():
    xs = np.zeros(100)
    assert cusum_stop(xs, 0.5, 0.5, alpha=0.05) is None
    assert cusum2_stop(xs, 0.5, 0.5, alpha=0.05) is None


def test_cusum_threshold_validation():
    with pytest.raises(ValueError):
        CusumState(threshold=1.0)

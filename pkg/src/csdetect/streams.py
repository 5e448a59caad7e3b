"""Piecewise-i.i.d. scenario generators, true-distance helpers and stream I/O.

Observation ``t`` (1-based) is drawn from the pre-change law when
``t <= change_at`` and from the post-change law afterwards.
"""

from __future__ import annotations

import io
import math
import sys
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy import optimize, stats

FAMILIES = ("gaussian_mean", "bounded_mixture", "t_location_scale",
            "paired_mvn", "classifier_risk", "file")


def trial_seed(base_seed: int, trial_index: int) -> int:
    """Independent 64-bit seed for one trial of an experiment."""
    ss = np.random.SeedSequence([int(base_seed), int(trial_index)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class StreamSpec:
    """A change scenario.

    ``theta0``/``theta1`` mean: Gaussian means; mixture means; t location
    shift (post-change scale is ``params['scale1']``, default 2); the shift
    ``delta`` of the v-component for paired MVN (``theta0`` unused); the
    rotation angle for the classifier risk stream (pre-change angle
    ``theta0``, usually 0).  ``change_at=None`` means no change.
    """

    family: str = "gaussian_mean"
    theta0: float = 0.0
    theta1: float = 0.0
    change_at: Optional[int] = None
    horizon: int = 1000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown stream family {self.family!r}")
        if self.change_at is not None:
            if isinstance(self.change_at, float) and math.isinf(self.change_at):
                self.change_at = None
            elif self.change_at < 1:
                raise ValueError("change_at must be >= 1 or None")
            else:
                self.change_at = int(self.change_at)
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")

    @property
    def n_pre(self) -> int:
        if self.change_at is None:
            return self.horizon
        return min(self.change_at, self.horizon)

    def with_seed(self, seed: int) -> "StreamSpec":
        return replace(self, seed=int(seed), params=dict(self.params))

    def resolved(self) -> "StreamSpec":
        """Fix seed-dependent scenario constants (the MVN covariance)."""
        if self.family == "paired_mvn" and "cov_diag" not in self.params:
            p = int(self.params.get("dim", 5))
            rng = np.random.default_rng([int(self.seed), 0xC0])
            params = dict(self.params, cov_diag=rng.uniform(0.5, 2.0, size=p).tolist())
            return replace(self, params=params)
        return self


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_gaussian(spec: StreamSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal(spec.horizon)
    x[: spec.n_pre] += spec.theta0
    x[spec.n_pre:] += spec.theta1
    return x


def bounded_mixture_sample(theta: float, rng, size=None):
    """Draw from ``(1 - theta) U[0, theta] + theta U[theta, 1]`` (mean ``theta``)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    upper_part = rng.random(size) < theta
    u = rng.random(size)
    out = np.where(upper_part, theta + (1.0 - theta) * u, theta * u)
    return float(out) if size is None else out


def gen_bounded_mixture(spec: StreamSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    pre = bounded_mixture_sample(spec.theta0, rng, spec.n_pre)
    post = bounded_mixture_sample(spec.theta1, rng, spec.horizon - spec.n_pre)
    return np.concatenate([pre, post])


def t_dists(spec_or_shift, df: float = 3.0, scale1: float = 2.0, loc0: float = 0.0):
    """Frozen pre/post t distributions for the location-scale scenario."""
    shift = spec_or_shift.theta1 if isinstance(spec_or_shift, StreamSpec) else float(spec_or_shift)
    return stats.t(df, loc=loc0, scale=1.0), stats.t(df, loc=shift, scale=scale1)


def gen_t_stream(spec: StreamSpec) -> np.ndarray:
    df = float(spec.params.get("df", 3.0))
    scale1 = float(spec.params.get("scale1", 2.0))
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_t(df, spec.horizon)
    x = z + spec.theta0
    x[spec.n_pre:] = spec.theta1 + scale1 * z[spec.n_pre:]
    return x


def gen_paired_mvn(spec: StreamSpec) -> np.ndarray:
    """Pairs ``(u, v)`` of shape ``(horizon, 2, dim)``.

    Both halves are ``N(0, I)`` before the change; afterwards ``v`` is
    ``N(delta * 1, diag(cov_diag))`` with ``delta = theta1``.
    """
    spec = spec.resolved()
    p = int(spec.params.get("dim", 5))
    sd = np.sqrt(np.asarray(spec.params["cov_diag"], dtype=float))
    rng = np.random.default_rng(spec.seed)
    out = rng.standard_normal((spec.horizon, 2, p))
    out[spec.n_pre:, 1, :] = spec.theta1 + sd * out[spec.n_pre:, 1, :]
    return out


def gen_risk_stream(spec: StreamSpec) -> np.ndarray:
    """0-1 losses of the classifier ``sign(z_1)`` on rotated-mean features."""
    rng = np.random.default_rng(spec.seed)
    n = spec.horizon
    label = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    angle = np.full(n, float(spec.theta0))
    angle[spec.n_pre:] = spec.theta1
    z1 = label * np.cos(angle) + rng.standard_normal(n)
    rng.standard_normal(n)                      # second feature, unused by h*
    pred = np.where(z1 >= 0, 1.0, -1.0)
    return (pred != label).astype(float)


GENERATORS = {
    "gaussian_mean": gen_gaussian,
    "bounded_mixture": gen_bounded_mixture,
    "t_location_scale": gen_t_stream,
    "paired_mvn": gen_paired_mvn,
    "classifier_risk": gen_risk_stream,
}


def generate(spec: StreamSpec) -> np.ndarray:
    if spec.family == "file":
        return read_stream(spec.params["path"], spec.params.get("format", "auto"))
    return GENERATORS[spec.family](spec)


# ---------------------------------------------------------------------------
# true distances
# ---------------------------------------------------------------------------


def _as_cdf(d) -> Callable:
    return d.cdf if hasattr(d, "cdf") else d


def _support_window(d0, d1):
    pts = []
    for d in (d0, d1):
        if hasattr(d, "ppf"):
            pts += [float(d.ppf(1e-9)), float(d.ppf(1 - 1e-9))]
    if not pts:
        return -50.0, 50.0
    return min(pts), max(pts)


def ks_distance_numeric(dist0, dist1, grid_size: int = 20001) -> float:
    """``sup_x |F0(x) - F1(x)|`` for continuous laws.

    Accepts frozen scipy distributions (their quantiles set the window) or
    bare CDF callables.  A dense grid locates the maximiser, then a bounded
    scalar search polishes it.
    """
    F0, F1 = _as_cdf(dist0), _as_cdf(dist1)
    lo, hi = _support_window(dist0, dist1)
    x = np.linspace(lo, hi, grid_size)
    gap = np.abs(F0(x) - F1(x))
    i = int(np.argmax(gap))
    a, b = x[max(i - 1, 0)], x[min(i + 1, grid_size - 1)]
    res = optimize.minimize_scalar(lambda z: -abs(float(F0(z)) - float(F1(z))),
                                   bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-12})
    best = max(float(gap[i]), -float(res.fun))
    return float(min(max(best, 0.0), 1.0))


def t_shift_for_ks(target: float, df: float = 3.0, scale1: float = 2.0) -> float:
    """Post-change location ``delta`` giving KS distance ``target``."""
    def f(delta):
        d0, d1 = t_dists(delta, df, scale1)
        return ks_distance_numeric(d0, d1) - target
    base = f(0.0)
    if base >= 0:
        raise ValueError(f"KS distance is already {base + target:.4f} at zero shift")
    return float(optimize.brentq(f, 0.0, 50.0, xtol=1e-10))


def gaussian_kernel_mean(mu1, cov1, mu2, cov2, bandwidth: float) -> float:
    """``E k(X, Y)`` for independent Gaussians and the RBF kernel."""
    mu1, mu2 = np.asarray(mu1, float), np.asarray(mu2, float)
    S = np.asarray(cov1, float) + np.asarray(cov2, float)
    p = mu1.size
    b2 = bandwidth ** 2
    dm = mu1 - mu2
    det = np.linalg.det(np.eye(p) + S / b2)
    quad = dm @ np.linalg.solve(S + b2 * np.eye(p), dm)
    return float(det ** -0.5 * math.exp(-0.5 * quad))


def mmd_population_gaussian(mu_u, cov_u, mu_v, cov_v, bandwidth: float) -> float:
    """Population MMD between two Gaussian laws under the RBF kernel."""
    sq = (gaussian_kernel_mean(mu_u, cov_u, mu_u, cov_u, bandwidth)
          + gaussian_kernel_mean(mu_v, cov_v, mu_v, cov_v, bandwidth)
          - 2 * gaussian_kernel_mean(mu_u, cov_u, mu_v, cov_v, bandwidth))
    return math.sqrt(max(sq, 0.0))


def mvn_reference_bandwidth(dim: int = 5) -> float:
    """Population median distance between two independent ``N(0, I)`` points.

    This is the limit of the median heuristic on pre-change pairs.
    """
    return math.sqrt(2.0 * stats.chi2(dim).median())


def paired_mvn_delta(spec: StreamSpec, bandwidth: Optional[float] = None) -> float:
    spec = spec.resolved()
    p = int(spec.params.get("dim", 5))
    bw = bandwidth or mvn_reference_bandwidth(p)
    return mmd_population_gaussian(np.zeros(p), np.eye(p), np.full(p, spec.theta1),
                                   np.diag(spec.params["cov_diag"]), bw)


def mvn_shift_for_mmd(target: float, spec: StreamSpec,
                      bandwidth: Optional[float] = None) -> float:
    """Shift ``delta`` giving population MMD ``target`` for the seeded diagonal covariance."""
    spec = spec.resolved()

    def f(d):
        return paired_mvn_delta(replace(spec, theta1=d), bandwidth) - target
    if f(0.0) >= 0:
        raise ValueError("target is below the MMD produced by the covariance change alone")
    return float(optimize.brentq(f, 0.0, 20.0, xtol=1e-10))


def classifier_risk(angle: float) -> float:
    """Population 0-1 risk of ``sign(z_1)`` when class means sit at ``angle``."""
    return float(stats.norm.cdf(-math.cos(angle)))


def classifier_risk_delta(gamma: float, gamma0: float = 0.0) -> float:
    return classifier_risk(gamma) - classifier_risk(gamma0)


def rotation_for_risk_delta(target: float) -> float:
    """Rotation angle in ``[0, pi]`` raising the risk by ``target``."""
    return float(optimize.brentq(lambda g: classifier_risk_delta(g) - target,
                                 0.0, math.pi, xtol=1e-12))


def true_delta(spec: StreamSpec) -> float:
    """Distance between the pre- and post-change laws for a scenario."""
    fam = spec.family
    if fam in ("gaussian_mean", "bounded_mixture"):
        return abs(spec.theta1 - spec.theta0)
    if fam == "t_location_scale":
        d0, d1 = t_dists(spec, spec.params.get("df", 3.0), spec.params.get("scale1", 2.0),
                         spec.theta0)
        return ks_distance_numeric(d0, d1)
    if fam == "paired_mvn":
        return paired_mvn_delta(spec, spec.params.get("bandwidth"))
    if fam == "classifier_risk":
        return classifier_risk_delta(spec.theta1, spec.theta0)
    raise ValueError(f"no population distance for {fam!r}")


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


class StreamFormatError(ValueError):
    pass


def _parse_vector(text: str, lineno: int) -> np.ndarray:
    try:
        vals = [float(tok) for tok in text.split(",")]
    except ValueError:
        raise StreamFormatError(f"line {lineno}: cannot parse {text.strip()!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise StreamFormatError(f"line {lineno}: non-finite value")
    return np.asarray(vals)


def iter_stream(lines, fmt: str = "auto"):
    """Yield observations parsed from an iterable of text lines."""
    if fmt not in ("auto", "scalar", "pairs"):
        raise ValueError(f"unknown stream format {fmt!r}")
    dim = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        paired = "|" in line
        if fmt == "scalar" and paired or fmt == "pairs" and not paired:
            raise StreamFormatError(f"line {lineno}: expected {fmt} format")
        if paired:
            parts = line.split("|")
            if len(parts) != 2:
                raise StreamFormatError(f"line {lineno}: expected exactly one '|'")
            u, v = (_parse_vector(p, lineno) for p in parts)
            if u.size != v.size or (dim is not None and u.size != dim):
                raise StreamFormatError(f"line {lineno}: inconsistent vector dimension")
            dim = u.size
            fmt = "pairs"
            yield np.stack([u, v])
        else:
            vec = _parse_vector(line, lineno)
            if vec.size != 1:
                raise StreamFormatError(f"line {lineno}: expected one scalar")
            fmt = "scalar"
            yield float(vec[0])


def read_stream(source: Union[str, io.TextIOBase, None] = None, fmt: str = "auto"):
    """Read a whole stream from a path, a text handle, or standard input."""
    if source is None or source == "-":
        obs = list(iter_stream(sys.stdin, fmt))
    elif isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            obs = list(iter_stream(fh, fmt))
    else:
        obs = list(iter_stream(source, fmt))
    if not obs:
        raise StreamFormatError("empty input")
    return np.asarray(obs, dtype=float)

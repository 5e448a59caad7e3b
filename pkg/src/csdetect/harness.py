"""Monte Carlo experiments: false alarms, run lengths, delays and estimators.

Every trial draws its own seed from ``(base seed, trial index)``, so serial
and parallel runs produce identical rows.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .detectors import DetectorConfig, make_detector
from . import streams as st

TRIAL_FIELDS = ("trial_index", "seed", "alarmed", "tau", "delay", "t_hat",
                "eps_hat", "censored")
HIST_BINS = 20


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    alarmed: bool
    tau: int
    delay: float
    t_hat: float
    eps_hat: float
    censored: bool


@dataclass
class ExperimentSpec:
    """One Monte Carlo study.

    ``known_pre_change`` fills ``detector.theta0`` from the stream's
    pre-change law.  ``arl_truncation`` caps null runs.
    """

    detector: DetectorConfig
    stream: st.StreamSpec
    trials: int = 250
    detector_kind: str = "bcs"
    arl_truncation: int = 200
    delta_grid: Optional[list] = None
    parallelism: int = 1
    known_pre_change: bool = False

    def __post_init__(self):
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        if self.arl_truncation < 1:
            raise ValueError("arl_truncation must be >= 1")


@dataclass
class ExperimentReport:
    trials: List[TrialResult]
    aggregates: dict
    histograms: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# single trials
# ---------------------------------------------------------------------------


def known_pre_change_value(spec: st.StreamSpec):
    """The pre-change parameter in the form the matching CS family expects."""
    fam = spec.family
    if fam in ("gaussian_mean", "bounded_mixture"):
        return float(spec.theta0)
    if fam == "t_location_scale":
        return stats.t(float(spec.params.get("df", 3.0)), loc=spec.theta0, scale=1.0).cdf
    if fam == "paired_mvn":
        return 0.0
    if fam == "classifier_risk":
        return st.classifier_risk(spec.theta0)
    raise ValueError(f"no known pre-change value for {fam!r}")


def _trial_config(exp: ExperimentSpec) -> DetectorConfig:
    if exp.known_pre_change and exp.detector.theta0 is None:
        return replace(exp.detector, theta0=known_pre_change_value(exp.stream))
    return exp.detector


def run_trial(cfg: DetectorConfig, spec: st.StreamSpec, seed: int,
              kind: str = "bcs", trial_index: int = 0) -> TrialResult:
    """Stream one scenario into a fresh detector until alarm or horizon."""
    spec = spec.with_seed(seed)
    xs = st.generate(spec)
    horizon = len(xs) if cfg.max_horizon is None else min(len(xs), cfg.max_horizon)
    det = make_detector(cfg, kind)
    rep = det.run(xs[:horizon])
    T = spec.change_at
    if rep is None:
        return TrialResult(trial_index, seed, False, horizon, math.nan, math.nan,
                           math.nan, True)
    delay = float(max(rep.tau - T, 0)) if T is not None else math.nan
    return TrialResult(trial_index, seed, True, rep.tau, delay, float(rep.t_hat),
                       float(rep.eps_hat), False)


def _run_indexed(args):
    cfg, spec, base_seed, i, kind = args
    return run_trial(cfg, spec, st.trial_seed(base_seed, i), kind, i)


def run_experiment(exp: ExperimentSpec) -> ExperimentReport:
    cfg = _trial_config(exp)
    spec = exp.stream.resolved()
    jobs = [(cfg, spec, spec.seed, i, exp.detector_kind) for i in range(exp.trials)]
    if exp.parallelism > 1 and exp.trials > 1:
        with ProcessPoolExecutor(max_workers=exp.parallelism) as pool:
            trials = list(pool.map(_run_indexed, jobs, chunksize=max(1, exp.trials // (4 * exp.parallelism))))
    else:
        trials = [_run_indexed(j) for j in jobs]
    trials.sort(key=lambda r: r.trial_index)
    aggregates, hists = aggregate(trials)
    meta = {"detector_kind": exp.detector_kind, "family": cfg.family,
            "alpha": cfg.alpha, "check_frequency": cfg.check_frequency,
            "stream_family": spec.family, "theta0": spec.theta0,
            "theta1": spec.theta1, "change_at": spec.change_at,
            "horizon": spec.horizon, "seed": spec.seed,
            "known_pre_change": exp.known_pre_change}
    return ExperimentReport(trials, aggregates, hists, meta)


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def _histogram(values, bins=HIST_BINS):
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if v.size == 0:
        return []
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        hi = lo + 1.0
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def histogram_mode(hist) -> float:
    """Centre of the most populated bin."""
    if not hist:
        return math.nan
    lo, hi, _ = max(hist, key=lambda b: b[2])
    return (lo + hi) / 2.0


def aggregate(trials: Sequence[TrialResult]):
    """Summary statistics recomputable from the per-trial rows alone."""
    n = len(trials)
    if n == 0:
        return {}, {}
    alarmed = np.array([t.alarmed for t in trials])
    censored = np.array([t.censored for t in trials])
    tau = np.array([t.tau for t in trials], dtype=float)
    delay = np.array([t.delay for t in trials], dtype=float)
    usable = (~censored) & np.isfinite(delay)
    d = delay[usable]
    agg = {
        "n_trials": n,
        "alarm_fraction": float(alarmed.mean()),
        "censored_fraction": float(censored.mean()),
        "mean_tau": float(tau.mean()),
        "n_delay": int(usable.sum()),
        "mean_delay": float(d.mean()) if d.size else math.nan,
        "median_delay": float(np.median(d)) if d.size else math.nan,
        "sd_delay": float(d.std(ddof=1)) if d.size > 1 else math.nan,
        "median_t_hat": float(np.median([t.t_hat for t in trials if t.alarmed])) if alarmed.any() else math.nan,
        "median_eps_hat": float(np.median([t.eps_hat for t in trials if t.alarmed])) if alarmed.any() else math.nan,
    }
    hists = {"t_hat": _histogram([t.t_hat for t in trials]),
             "eps_hat": _histogram([t.eps_hat for t in trials])}
    agg["mode_eps_hat"] = histogram_mode(hists["eps_hat"])
    return agg, hists


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


@dataclass
class PfaResult:
    fraction: float
    ci: tuple
    report: ExperimentReport


def estimate_pfa(cfg: DetectorConfig, null_spec: st.StreamSpec, trials: int,
                 horizon: int, kind: str = "fcs", parallelism: int = 1) -> PfaResult:
    """Fraction of null trials alarming within ``horizon``."""
    if trials < 1:
        raise ValueError("need at least one trial")
    spec = replace(null_spec, change_at=None, horizon=horizon)
    rep = run_experiment(ExperimentSpec(cfg, spec, trials, kind, parallelism=parallelism))
    k = sum(t.alarmed for t in rep.trials)
    ci = stats.binomtest(k, trials).proportion_ci(0.95, method="exact")
    return PfaResult(k / trials, (float(ci.low), float(ci.high)), rep)


@dataclass
class ArlResult:
    truncated_mean: float
    censored_fraction: float
    bound: float
    report: ExperimentReport


def arl_lower_bound(alpha: float) -> float:
    return 1.0 / (2.0 * alpha) - 1.5


def estimate_arl(cfg: DetectorConfig, null_spec: st.StreamSpec, trials: int,
                 truncation: int, kind: str = "bcs", parallelism: int = 1) -> ArlResult:
    """Mean of ``min(tau, truncation)`` over null trials."""
    if trials < 1:
        raise ValueError("need at least one trial")
    spec = replace(null_spec, change_at=None, horizon=truncation)
    rep = run_experiment(ExperimentSpec(cfg, spec, trials, kind,
                                        arl_truncation=truncation, parallelism=parallelism))
    tau = np.minimum([t.tau for t in rep.trials], truncation)
    return ArlResult(float(np.mean(tau)), rep.aggregates["censored_fraction"],
                     arl_lower_bound(cfg.alpha), rep)


def scenario_for_delta(spec: st.StreamSpec, delta: float) -> st.StreamSpec:
    """Stream spec whose pre/post distance equals ``delta``."""
    fam = spec.family
    if fam in ("gaussian_mean", "bounded_mixture"):
        return replace(spec, theta1=spec.theta0 + delta)
    if fam == "t_location_scale":
        shift = st.t_shift_for_ks(delta, spec.params.get("df", 3.0), spec.params.get("scale1", 2.0))
        return replace(spec, theta1=spec.theta0 + shift)
    if fam == "paired_mvn":
        spec = spec.resolved()
        return replace(spec, theta1=st.mvn_shift_for_mmd(delta, spec, spec.params.get("bandwidth")))
    if fam == "classifier_risk":
        return replace(spec, theta1=st.rotation_for_risk_delta(delta))
    raise ValueError(f"cannot set a distance for {fam!r}")


@dataclass
class CurveRow:
    delta: float
    mean_delay: float
    sd_delay: float
    n_delay: int
    censored_fraction: float
    flagged: bool


@dataclass
class DelayCurve:
    rows: List[CurveRow]
    slope: Optional[float]
    intercept: Optional[float]
    reports: list = field(repr=False, default_factory=list)


def fit_loglog(deltas, delays):
    x, y = np.log(np.asarray(deltas, float)), np.log(np.asarray(delays, float))
    if x.size < 2:
        return None, None
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def delay_curve(exp: ExperimentSpec, delta_grid: Optional[Sequence[float]] = None) -> DelayCurve:
    """Mean delay per distance and the log-log slope against the distance."""
    grid = list(delta_grid if delta_grid is not None else (exp.delta_grid or []))
    if not grid:
        raise ValueError("delta grid is empty")
    if any(not d > 0 for d in grid):
        raise ValueError("grid distances must be positive")
    rows, reports = [], []
    for d in grid:
        rep = run_experiment(replace(exp, stream=scenario_for_delta(exp.stream, d)))
        a = rep.aggregates
        flagged = a["n_delay"] == 0
        rows.append(CurveRow(float(d), a["mean_delay"], a["sd_delay"], a["n_delay"],
                             a["censored_fraction"], flagged))
        reports.append(rep)
    ok = [r for r in rows if not r.flagged and r.mean_delay > 0]
    slope, intercept = fit_loglog([r.delta for r in ok], [r.mean_delay for r in ok])
    return DelayCurve(rows, slope, intercept, reports)


@dataclass
class ProbeRow:
    T: int
    fcs_mean_delay: float
    bcs_mean_delay: float
    fcs_censored: float
    bcs_censored: float


def t_dependence_probe(exp: ExperimentSpec, T_grid: Sequence[int],
                       post_horizon: int = 5000) -> List[ProbeRow]:
    """Mean delays of both detectors as the change time moves."""
    rows = []
    for T in T_grid:
        spec = replace(exp.stream, change_at=int(T), horizon=int(T) + post_horizon)
        out = {}
        for kind in ("fcs", "bcs"):
            rep = run_experiment(replace(exp, stream=spec, detector_kind=kind,
                                         known_pre_change=False))
            out[kind] = rep.aggregates
        rows.append(ProbeRow(int(T), out["fcs"]["mean_delay"], out["bcs"]["mean_delay"],
                             out["fcs"]["censored_fraction"], out["bcs"]["censored_fraction"]))
    return rows


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "nan"
    v = float(v)
    if v.is_integer() and math.isfinite(v):
        return str(int(v))
    return repr(v)


def _write_report(report: ExperimentReport, fh, timestamp: bool) -> None:
    if timestamp:
        fh.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRIAL_FIELDS)
    for t in report.trials:
        w.writerow([_fmt(getattr(t, f)) for f in TRIAL_FIELDS])
    if not report.trials:
        return
    fh.write("\n")
    w.writerow(("metric", "name", "value"))
    for k, v in report.aggregates.items():
        w.writerow(("summary", k, _fmt(v)))
    for hname, bins in report.histograms.items():
        for lo, hi, c in bins:
            w.writerow((f"hist_{hname}", f"{_fmt(lo)}:{_fmt(hi)}", c))
    for k, v in report.metadata.items():
        w.writerow(("meta", k, "nan" if v is None else v))


def emit_csv(report: ExperimentReport, path, timestamp: bool = False) -> None:
    """Write per-trial rows, then a ``metric,name,value`` aggregates block.

    Args:
        report: experiment output.
        path: file path or an open text handle.
        timestamp: prepend a ``# generated`` comment line.
    """
    if hasattr(path, "write"):
        _write_report(report, path, timestamp)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_report(report, fh, timestamp)


def read_csv(path):
    """Parse a report file into ``(trials, aggregates)``."""
    trials, agg = [], {}
    section = "trials"
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    for r in rows:
        if not r:
            continue
        if tuple(r) == TRIAL_FIELDS:
            section = "trials"
            continue
        if tuple(r) == ("metric", "name", "value"):
            section = "agg"
            continue
        if section == "trials":
            i, seed, alarmed, tau, delay, t_hat, eps_hat, cens = r
            trials.append(TrialResult(int(i), int(seed), alarmed == "1", int(tau),
                                      float(delay), float(t_hat), float(eps_hat), cens == "1"))
        elif r[0] == "summary":
            agg[r[1]] = float(r[2])
    return trials, agg

"""Command-line interface.

Exit codes: 0 finished without alarm, 2 alarm raised (``monitor``), 1 error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import harness as hs
from . import streams as st
from .detectors import (DetectorConfig, UndetectableError, family_width,
                        fcs_delay_certificate, make_detector, solve_t0, solve_u0)
from .sequences import FAMILIES as CS_FAMILIES

EXIT_OK, EXIT_ERROR, EXIT_ALARM = 0, 1, 2
COMMANDS = ("monitor", "simulate", "arl", "pfa", "delay-curve", "t-probe", "certificate")

DETECTOR_KEYS = {"alpha": float, "family": str, "params": dict, "sidedness": str,
                 "check_frequency": int, "max_horizon": int, "theta0": float,
                 "kind": str, "known_pre_change": bool}
STREAM_KEYS = {"family": str, "theta0": float, "theta1": float, "change_at": int,
               "horizon": int, "seed": int, "params": dict}
COMMAND_KEYS = {"trials": int, "parallelism": int, "arl_truncation": int,
                "pfa_horizon": int, "delta_grid": list, "T_grid": list,
                "post_horizon": int, "delta": float, "T": int, "variance": float,
                "zero_widths": bool, "format": str, "input": str, "heartbeat": int}
DEFAULT_STREAM = {"gaussian_mean": "gaussian_mean", "bounded_mean": "bounded_mixture",
                  "cdf": "t_location_scale", "mmd": "paired_mvn"}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


def _check_section(section, keys, where, problems):
    if not isinstance(section, dict):
        problems.append(f"{where}: expected an object")
        return
    for k, v in section.items():
        if k not in keys:
            problems.append(f"{where}.{k}: unknown field")
            continue
        want = keys[k]
        if v is None:
            continue
        if want is float and isinstance(v, (int, float)) and not isinstance(v, bool):
            continue
        if want is int and isinstance(v, int) and not isinstance(v, bool):
            continue
        if not isinstance(v, want) or (want is int and isinstance(v, bool)):
            problems.append(f"{where}.{k}: expected {want.__name__}")


def validate_config(cfg: dict) -> None:
    """Raise :class:`ConfigError` listing every offending field."""
    problems = []
    if not isinstance(cfg, dict):
        raise ConfigError(["config root must be an object"])
    for k, v in cfg.items():
        if k == "detector":
            _check_section(v, DETECTOR_KEYS, k, problems)
        elif k == "stream":
            _check_section(v, STREAM_KEYS, k, problems)
        elif k in COMMANDS:
            _check_section(v, COMMAND_KEYS, k, problems)
        else:
            problems.append(f"{k}: unknown section")
    det = cfg.get("detector", {}) if isinstance(cfg.get("detector"), dict) else {}
    if "family" in det and det["family"] not in CS_FAMILIES:
        problems.append(f"detector.family: must be one of {sorted(CS_FAMILIES)}")
    if "kind" in det and det["kind"] not in ("bcs", "fcs"):
        problems.append("detector.kind: must be 'bcs' or 'fcs'")
    if "alpha" in det and isinstance(det["alpha"], (int, float)) and not 0 < det["alpha"] < 1:
        problems.append("detector.alpha: must lie in (0, 1)")
    strm = cfg.get("stream", {}) if isinstance(cfg.get("stream"), dict) else {}
    if "family" in strm and strm["family"] not in st.FAMILIES:
        problems.append(f"stream.family: must be one of {list(st.FAMILIES)}")
    for name in ("delay-curve",):
        sec = cfg.get(name)
        if isinstance(sec, dict) and "delta_grid" in sec and not sec["delta_grid"]:
            problems.append(f"{name}.delta_grid: must be nonempty")
    if problems:
        raise ConfigError(problems)


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    validate_config(cfg)
    return cfg


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = json.loads(json.dumps(cfg))
    det = cfg.setdefault("detector", {})
    strm = cfg.setdefault("stream", {})
    sec = cfg.setdefault(args.command, {})
    if args.alpha is not None:
        det["alpha"] = args.alpha
    if args.family is not None:
        det["family"] = args.family
    if args.check_frequency is not None:
        det["check_frequency"] = args.check_frequency
    if args.seed is not None:
        strm["seed"] = args.seed
    if args.trials is not None:
        sec["trials"] = args.trials
    for flag in ("delta", "T", "input", "format", "heartbeat"):
        val = getattr(args, flag, None)
        if val is not None:
            sec[flag] = val
    if getattr(args, "detector", None) is not None:
        det["kind"] = args.detector
    validate_config(cfg)
    return cfg


def build_detector_config(det: dict) -> DetectorConfig:
    return DetectorConfig(alpha=det.get("alpha", 0.05), family=det.get("family", "gaussian_mean"),
                          params=det.get("params", {}) or {},
                          sidedness=det.get("sidedness", "two_sided"),
                          check_frequency=det.get("check_frequency", 1),
                          max_horizon=det.get("max_horizon"), theta0=det.get("theta0"))


def build_stream_spec(strm: dict, det_family: str) -> st.StreamSpec:
    return st.StreamSpec(family=strm.get("family", DEFAULT_STREAM[det_family]),
                         theta0=strm.get("theta0", 0.0), theta1=strm.get("theta1", 0.0),
                         change_at=strm.get("change_at"), horizon=strm.get("horizon", 1000),
                         seed=strm.get("seed", 0), params=strm.get("params", {}) or {})


def build_experiment(cfg: dict, command: str) -> hs.ExperimentSpec:
    det = cfg.get("detector", {})
    dcfg = build_detector_config(det)
    spec = build_stream_spec(cfg.get("stream", {}), dcfg.family)
    sec = cfg.get(command, {})
    return hs.ExperimentSpec(dcfg, spec, trials=sec.get("trials", 250),
                             detector_kind=det.get("kind", "bcs"),
                             arl_truncation=sec.get("arl_truncation", 200),
                             delta_grid=sec.get("delta_grid"),
                             parallelism=sec.get("parallelism", 1),
                             known_pre_change=det.get("known_pre_change", False))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _event(obj, out=None):
    out = out or sys.stdout
    out.write(json.dumps(obj) + "\n")
    out.flush()


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def cmd_monitor(cfg: dict, args) -> int:
    det = cfg.get("detector", {})
    sec = cfg.get("monitor", {})
    detector = make_detector(build_detector_config(det), det.get("kind", "bcs"))
    source = sec.get("input", "-")
    fmt = sec.get("format", "auto")
    heartbeat = int(sec.get("heartbeat", 0) or 0)
    fh = sys.stdin if source == "-" else open(source, encoding="utf-8")
    try:
        n = 0
        for x in st.iter_stream(fh, fmt):
            if n >= args.max_steps:
                raise RuntimeError(f"step limit {args.max_steps} reached without alarm; "
                                   "raise --max-steps to continue")
            n += 1
            rep = detector.step(x)
            if rep is not None:
                _event({"event": "alarm", "tau": rep.tau, "t_hat": rep.t_hat,
                        "eps_hat": _json_num(rep.eps_hat)})
                return EXIT_ALARM
            if heartbeat and n % heartbeat == 0:
                _event({"event": "heartbeat", "n": n})
        if n == 0:
            raise st.StreamFormatError("empty input")
    finally:
        if fh is not sys.stdin:
            fh.close()
    _event({"event": "end", "n": n})
    return EXIT_OK


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")


def _write_report(report, args):
    out = _open_out(args.output)
    try:
        hs.emit_csv(report, out, timestamp=not args.no_timestamp)
    finally:
        if out is not sys.stdout:
            out.close()


def _summary(line: str):
    sys.stderr.write(line + "\n")


def cmd_simulate(cfg, args) -> int:
    exp = build_experiment(cfg, "simulate")
    rep = hs.run_experiment(exp)
    _write_report(rep, args)
    a = rep.aggregates
    _summary(f"simulate trials={a.get('n_trials', 0)} mean_delay={a.get('mean_delay')} "
             f"alarm_fraction={a.get('alarm_fraction')} censored_fraction={a.get('censored_fraction')}")
    return EXIT_OK


def cmd_arl(cfg, args) -> int:
    exp = build_experiment(cfg, "arl")
    res = hs.estimate_arl(exp.detector, exp.stream, exp.trials, exp.arl_truncation,
                          exp.detector_kind, exp.parallelism)
    _write_report(res.report, args)
    _summary(f"arl truncated_mean={res.truncated_mean:.4f} bound={res.bound:.4f} "
             f"truncation={exp.arl_truncation} censored_fraction={res.censored_fraction:.4f}")
    return EXIT_OK


def cmd_pfa(cfg, args) -> int:
    exp = build_experiment(cfg, "pfa")
    horizon = cfg.get("pfa", {}).get("pfa_horizon", exp.stream.horizon)
    kind = cfg.get("detector", {}).get("kind", "fcs")
    res = hs.estimate_pfa(exp.detector, exp.stream, exp.trials, horizon, kind, exp.parallelism)
    _write_report(res.report, args)
    _summary(f"pfa fraction={res.fraction:.4f} ci95=({res.ci[0]:.4f}, {res.ci[1]:.4f}) "
             f"alpha={exp.detector.alpha}")
    return EXIT_OK


def _write_table(header, rows, extra, args):
    out = _open_out(args.output)
    try:
        if not args.no_timestamp:
            out.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([hs._fmt(v) for v in r])
        if extra:
            out.write("\n")
            w.writerow(("metric", "name", "value"))
            for k, v in extra.items():
                w.writerow(("summary", k, hs._fmt(v)))
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_delay_curve(cfg, args) -> int:
    exp = build_experiment(cfg, "delay-curve")
    if not exp.delta_grid:
        raise ConfigError(["delay-curve.delta_grid: must be nonempty"])
    curve = hs.delay_curve(exp)
    rows = [(r.delta, r.mean_delay, r.sd_delay, r.n_delay, r.censored_fraction, r.flagged)
            for r in curve.rows]
    _write_table(("delta", "mean_delay", "sd_delay", "n_delay", "censored_fraction", "flagged"),
                 rows, {"slope": curve.slope, "intercept": curve.intercept}, args)
    _summary(f"delay-curve points={len(rows)} slope={curve.slope}")
    return EXIT_OK


def cmd_t_probe(cfg, args) -> int:
    exp = build_experiment(cfg, "t-probe")
    sec = cfg.get("t-probe", {})
    grid = sec.get("T_grid") or [exp.stream.change_at or 200]
    rows = hs.t_dependence_probe(exp, grid, sec.get("post_horizon", 5000))
    _write_table(("T", "fcs_mean_delay", "bcs_mean_delay", "fcs_censored", "bcs_censored"),
                 [(r.T, r.fcs_mean_delay, r.bcs_mean_delay, r.fcs_censored, r.bcs_censored)
                  for r in rows], {}, args)
    _summary("t-probe " + " ".join(f"T={r.T}:fcs={r.fcs_mean_delay:.1f},bcs={r.bcs_mean_delay:.1f}"
                                    for r in rows))
    return EXIT_OK


def cmd_certificate(cfg, args) -> int:
    det = cfg.get("detector", {})
    sec = cfg.get("certificate", {})
    dcfg = build_detector_config(det)
    delta = sec.get("delta")
    T = sec.get("T", 100)
    if delta is None:
        raise ConfigError(["certificate.delta: required"])
    if sec.get("zero_widths"):
        def width(t):
            return np.zeros(np.shape(t))
    else:
        width = family_width(dcfg.make_family(), sec.get("variance"))
    u0 = solve_u0(width, width, T, delta, dcfg.alpha)
    t0 = solve_t0(width, delta, dcfg.alpha)
    print(f"u0={u0.u0} delta={delta} T={T} alpha={dcfg.alpha}")
    print(f"t0={t0.u0}")
    try:
        print(f"fcs_delay={fcs_delay_certificate(width, T, 0.0, delta)}")
    except UndetectableError as exc:
        print(f"fcs_delay=undetectable ({exc})")
    return EXIT_OK


HANDLERS = {"monitor": cmd_monitor, "simulate": cmd_simulate, "arl": cmd_arl,
            "pfa": cmd_pfa, "delay-curve": cmd_delay_curve, "t-probe": cmd_t_probe,
            "certificate": cmd_certificate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--alpha", type=float)
    common.add_argument("--family", choices=sorted(CS_FAMILIES), help="confidence-sequence family")
    common.add_argument("--check-frequency", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--output", help="output CSV path (default: standard output)")
    common.add_argument("--max-steps", type=int, default=10 ** 6)
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp header line from CSV output")
    p = argparse.ArgumentParser(prog="csdetect", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "monitor":
            sp.add_argument("--input", help="input file, '-' for standard input")
            sp.add_argument("--format", choices=("auto", "scalar", "pairs"))
            sp.add_argument("--heartbeat", type=int, help="emit a heartbeat line every N steps")
            sp.add_argument("--detector", choices=("bcs", "fcs"))
        if name == "certificate":
            sp.add_argument("--delta", type=float)
            sp.add_argument("--T", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        for prob in exc.problems:
            sys.stderr.write(f"config error: {prob}\n")
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

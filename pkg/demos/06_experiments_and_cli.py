"""Monte Carlo studies and the command line.

Experiments draw one seed per trial from the base seed, so reruns give the
same rows.  The CLI drives the same studies from a JSON config.
"""

import io
import json
import tempfile
from contextlib import redirect_stdout
from pathlib import Path

from csdetect.cli import main
from csdetect.detectors import DetectorConfig
from csdetect.harness import (ExperimentSpec, delay_curve, emit_csv, estimate_arl,
                              run_experiment)
from csdetect.streams import StreamSpec

# %% a small delay study
exp = ExperimentSpec(DetectorConfig(alpha=0.01),
                     StreamSpec("gaussian_mean", 0.0, 0.6, change_at=200, horizon=3000, seed=1),
                     trials=20, known_pre_change=True)
rep = run_experiment(exp)
print({k: round(v, 3) for k, v in rep.aggregates.items()})

# %% run length under no change
arl = estimate_arl(DetectorConfig(alpha=0.05), StreamSpec(seed=2), trials=30, truncation=200)
print(f"truncated ARL {arl.truncated_mean:.1f} (bound {arl.bound})")

# %% delay against distance on a log-log scale
curve = delay_curve(exp, [0.4, 0.6, 0.9])
print("slope", round(curve.slope, 2))

# %% CSV report and the CLI
with tempfile.TemporaryDirectory() as tmp:
    emit_csv(rep, Path(tmp) / "report.csv")
    cfg = Path(tmp) / "cfg.json"
    cfg.write_text(json.dumps({"detector": {"alpha": 0.05}, "certificate": {"delta": 2.0, "T": 100}}))
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(["certificate", "--config", str(cfg)])
    print(buf.getvalue().strip(), "| exit", code)

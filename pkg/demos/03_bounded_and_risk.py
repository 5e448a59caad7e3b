"""Bounded observations: a mixture mean shift and a classifier's 0-1 loss.

Losses only matter when they go up, so the risk monitor uses one-sided
forward sets.
"""

import math

from csdetect.detectors import BcsDetector, DetectorConfig
from csdetect.streams import (StreamSpec, classifier_risk, generate, rotation_for_risk_delta)

# %% mixture mean 0.4 -> 0.6
xs = generate(StreamSpec("bounded_mixture", 0.4, 0.6, change_at=800, horizon=3000, seed=1))
rep = BcsDetector(DetectorConfig(alpha=0.01, family="bounded_mean")).run(xs)
print(f"mixture  tau={rep.tau}  t_hat={rep.t_hat}  eps_hat={rep.eps_hat:.3f}")

# %% rotate the class means until the risk rises by 0.16
gamma = rotation_for_risk_delta(0.16)
print(f"rotation {gamma:.4f} rad: risk {classifier_risk(0.0):.4f} -> {classifier_risk(gamma):.4f}")
losses = generate(StreamSpec("classifier_risk", 0.0, gamma, change_at=500, horizon=5000, seed=2))
cfg = DetectorConfig(alpha=0.05, family="bounded_mean", sidedness="upper_only")
rep = BcsDetector(cfg).run(losses)
print(f"risk     tau={rep.tau}  t_hat={rep.t_hat}")

# %% a risk decrease is not an alarm for an upper-only monitor
better = generate(StreamSpec("classifier_risk", math.pi / 3, 0.0, change_at=500, horizon=3000, seed=2))
print("decrease alarm:", BcsDetector(cfg).run(better))

"""Forward and backward detectors on a Gaussian mean shift.

The forward detector alarms once its running intersection is empty.  The
backward detector also rebuilds a confidence set on the reversed buffer and
alarms when it no longer meets the forward intersection.  Both report a
changepoint estimate and a magnitude estimate.
"""

from csdetect.detectors import BcsDetector, DetectorConfig, FcsDetector
from csdetect.streams import StreamSpec, generate

spec = StreamSpec("gaussian_mean", theta0=0.0, theta1=0.4, change_at=800, horizon=6000, seed=5)
xs = generate(spec)

# %% backward detector, unknown pre-change mean
rep = BcsDetector(DetectorConfig(alpha=0.01)).run(xs)
print(f"bcs  tau={rep.tau}  delay={rep.tau - 800}  t_hat={rep.t_hat}  eps_hat={rep.eps_hat:.3f}")

# %% the same detector told the pre-change mean
rep = BcsDetector(DetectorConfig(alpha=0.01, theta0=0.0)).run(xs)
print(f"bcs (known theta0)  tau={rep.tau}  t_hat={rep.t_hat}  eps_hat={rep.eps_hat:.3f}")

# %% rebuilding every 10 steps never alarms earlier
rep10 = BcsDetector(DetectorConfig(alpha=0.01, check_frequency=10)).run(xs)
print(f"bcs k=10  tau={rep10.tau}")

# %% forward detector: its delay grows with the change time
rep = FcsDetector(DetectorConfig(alpha=0.01)).run(xs)
print(f"fcs  tau={rep.tau}  delay={rep.tau - 800}")

# %% streaming use, one observation at a time
det = BcsDetector(DetectorConfig(alpha=0.01))
for n, x in enumerate(xs, start=1):
    out = det.step(x)
    if out is not None:
        print(f"streaming alarm at n={n}")
        break

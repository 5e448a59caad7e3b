"""Confidence sequences: four constructions on one screen.

Each construction turns a growing sample into a set that covers the true
parameter at every time simultaneously.  This script prints a few snapshots
and the closed-form widths.
"""

import numpy as np

from csdetect.sequences import (EmpiricalBernsteinCS, GaussianMeanCS, KolmogorovSmirnovCS,
                                MmdCS, gaussian_width, ks_width)
from csdetect.streams import bounded_mixture_sample

rng = np.random.default_rng(0)

# %% Gaussian mean: width depends only on t and alpha
xs = rng.normal(0.3, 1.0, 2000)
lo, hi = GaussianMeanCS(0.05).path(xs)
for t in (10, 100, 1000, 2000):
    print(f"gaussian  t={t:5d}  [{lo[t - 1]: .3f}, {hi[t - 1]: .3f}]  width={gaussian_width(t, 0.05):.3f}")

# %% bounded mean: empirical-Bernstein sets adapt to the variance
xs = bounded_mixture_sample(0.4, rng, 2000)
lo, hi = EmpiricalBernsteinCS(0.05).path(xs)
for t in (10, 100, 1000, 2000):
    print(f"bounded   t={t:5d}  [{lo[t - 1]:.3f}, {hi[t - 1]:.3f}]")

# %% CDF band: empirical CDF plus or minus half the KS width
state = KolmogorovSmirnovCS(0.05).new_state()
for x in rng.standard_t(3, 500):
    band = state.update(x)
print(f"cdf band  t=500  half-width={ks_width(500, 0.05) / 2:.3f}  "
      f"F(0) in [{band.lower[np.searchsorted(band.breakpoints, 0.0) - 1]:.3f}, "
      f"{band.upper[np.searchsorted(band.breakpoints, 0.0) - 1]:.3f}]")

# %% kernel MMD between the two halves of paired observations
pairs = rng.normal(size=(1500, 2, 2))
pairs[:, 1, 0] += 1.0
state = MmdCS(0.05).new_state()
for p in pairs:
    c = state.update(p)
print(f"mmd       t=1500  estimate={state.estimate():.3f}  set=[{c.lower:.3f}, {c.upper:.3f}]  "
      f"bandwidth={state.kernel.bandwidth:.3f}")

"""Delay certificates and the likelihood-ratio baseline.

The certificate is the first sample count at which the confidence-set widths
certify a given separation.  CuSum needs both densities; its backward
sequential-test form stops at exactly the same step.
"""

import numpy as np

from csdetect.detectors import (cusum2_stop, cusum_stop, fcs_delay_certificate, solve_t0,
                                solve_u0)
from csdetect.sequences import GaussianMeanCS

fam = GaussianMeanCS(0.05)

# %% certificates
print("u0 (delta=2, T=100):", solve_u0(fam.width, fam.width, 100, 2.0).u0)
print("t0 (delta=2):       ", solve_t0(fam.width, 2.0).u0)
for T in (100, 1000, 10000):
    print(f"forward-detector delay bound at T={T}: {fcs_delay_certificate(fam.width, T, 0.0, 2.0)}")

# %% CuSum and its reformulation
rng = np.random.default_rng(0)
xs = np.concatenate([rng.normal(0, 1, 300), rng.normal(1, 1, 300)])
print("cusum stop:   ", cusum_stop(xs, 0.0, 1.0, alpha=0.001))
print("cusum-II stop:", cusum2_stop(xs, 0.0, 1.0, alpha=0.001))

"""Changepoint detection with forward and backward confidence sequences."""

from .sets import (BandEnvelope, CdfBand, Interval, KnownCdf, RunningIntersection,
                   band_contains, band_feasible, band_separation, band_span,
                   fold_band, intersect, is_empty, separation, set_span, span)
from .sequences import (EmpiricalBernsteinCS, GaussianMeanCS, KernelSpec,
                        KolmogorovSmirnovCS, MmdCS, Sidedness, apply_sidedness,
                        gaussian_width, ks_width, make_family, mmd_estimate,
                        mmd_gamma, mmd_kappa, rbf_kernel)
from .detectors import (AlarmReport, BcsDetector, CusumState, DelayCertificate,
                        DetectorConfig, DetectorStopped, FcsDetector,
                        UndetectableError, backward_smallest, cusum2_stop,
                        cusum_stop, estimate_changepoint, estimate_magnitude,
                        fcs_delay_certificate, make_detector, solve_t0, solve_u0)
from .streams import StreamSpec, generate, read_stream, true_delta
from .harness import (ExperimentSpec, delay_curve, emit_csv, estimate_arl, estimate_pfa,
                      run_experiment, run_trial, t_dependence_probe)

__version__ = "0.1.0"

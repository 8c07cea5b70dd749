"""Detection of unknown-shape objects in noisy grayscale images.

The test thresholds the image, views black pixels as occupied sites of a
triangular lattice, and rejects the noise-only hypothesis when the largest
connected black cluster reaches a calibrated critical size.  Calibration runs
a union-find insertion sweep once per (side, trials, seed) and reads off
critical values for any density/level from the cached table.
"""

__version__ = "0.1.0"

from .bounds import binomial_remainder_bound, false_alarm_exact_vs_leading
from .clusters import (
    ClusterLabeling,
    crossing_probability,
    find_cluster_at_least,
    has_left_right_crossing,
    label_clusters,
    max_cluster_size,
)
from .lattice import SiteMask, TriangularLattice, build_lattice, embed_square, rasterize_support
from .mctest import (
    DetectionReport,
    ErrorEstimate,
    ErrorScenario,
    RateBoundParams,
    RateBounds,
    ScanReport,
    calibrate,
    estimate_errors,
    fit_lambda,
    gaussian_rates,
    phi_log,
    rate_bounds,
    run_test,
    threshold_scan,
    wilson_interval,
)
from .newman_ziff import (
    CriticalValueTable,
    MaxClusterDistribution,
    MicroCanonicalTable,
    TwoRegionTable,
    canonical,
    critical_value,
    merge,
    sweep,
    sweep_two_region,
    type_ii_full_support,
    type_ii_square_support,
)
from .noise import (
    BinaryField,
    GrayField,
    NoiseModel,
    SignalSpec,
    choose_threshold,
    gaussian_model,
    occupancy_probabilities,
    synthesize,
    threshold,
    validate_noise,
)

__all__ = [
    "BinaryField",
    "ClusterLabeling",
    "CriticalValueTable",
    "DetectionReport",
    "ErrorEstimate",
    "ErrorScenario",
    "GrayField",
    "MaxClusterDistribution",
    "MicroCanonicalTable",
    "NoiseModel",
    "RateBoundParams",
    "RateBounds",
    "ScanReport",
    "SignalSpec",
    "SiteMask",
    "TriangularLattice",
    "TwoRegionTable",
    "__version__",
    "binomial_remainder_bound",
    "build_lattice",
    "calibrate",
    "canonical",
    "choose_threshold",
    "critical_value",
    "crossing_probability",
    "embed_square",
    "estimate_errors",
    "false_alarm_exact_vs_leading",
    "find_cluster_at_least",
    "fit_lambda",
    "gaussian_model",
    "gaussian_rates",
    "has_left_right_crossing",
    "label_clusters",
    "max_cluster_size",
    "merge",
    "occupancy_probabilities",
    "phi_log",
    "rasterize_support",
    "rate_bounds",
    "run_test",
    "sweep",
    "sweep_two_region",
    "synthesize",
    "threshold",
    "threshold_scan",
    "type_ii_full_support",
    "type_ii_square_support",
    "validate_noise",
    "wilson_interval",
]

"""Shared command workflows behind the CLI and the HTTP service.

Each function is deterministic given its arguments (timings excluded), so a
rerun with the same configuration reproduces its output byte for byte.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from io import StringIO

import numpy as np
from scipy.stats import linregress

from . import mctest, newman_ziff
from .clusters import max_cluster_size
from .lattice import SiteMask, TriangularLattice, build_lattice
from .noise import GrayField, SignalSpec, gaussian_model, synthesize, threshold


def calibration_table(
    n: int,
    p_e_list: list[float],
    alpha_list: list[float],
    trials: int,
    seed: int,
    jobs: int = 1,
    cache=None,
) -> newman_ziff.CriticalValueTable:
    """Critical values on the (p_e, alpha) grid, all from one cached sweep."""
    micro = mctest.load_or_sweep(n, trials, seed, jobs=jobs, cache=cache)
    table = newman_ziff.CriticalValueTable()
    for alpha in alpha_list:
        for p_e in p_e_list:
            dist = micro.canonical(p_e)
            c0 = newman_ziff.critical_value(dist, alpha)
            table.add(n, p_e, alpha, c0, trials, seed)
    return table


def power_matrix(
    n: int,
    p_b_list: list[float],
    p_e_list: list[float],
    alpha: float,
    trials: int,
    seed: int,
    jobs: int = 1,
    cache=None,
) -> tuple[list[list[float]], list[int]]:
    """Type II error for every (p_b row, p_e column) pair at level alpha.

    Critical values are calibrated per column; each beta is the canonical
    mixture of the same sweep at the row's density.  Returns (matrix, c0s).
    """
    micro = mctest.load_or_sweep(n, trials, seed, jobs=jobs, cache=cache)
    c0s = [newman_ziff.critical_value(micro.canonical(pe), alpha) for pe in p_e_list]
    matrix = []
    for p_b in p_b_list:
        alt = micro.canonical(p_b)
        row = [float(1.0 - alt.survival[min(c0, micro.site_count + 1)]) for c0 in c0s]
        matrix.append(row)
    return matrix, c0s


def format_beta(beta: float, trials: int) -> str:
    """Estimates below the Monte Carlo floor are reported as bounds, not points."""
    floor = 1.0 / trials
    if beta < floor:
        return f"<{floor:.3g}"
    return repr(beta)


def power_csv(
    p_b_list: list[float], p_e_list: list[float], matrix: list[list[float]], trials: int
) -> str:
    buf = StringIO()
    buf.write("p_B," + ",".join(str(pe) for pe in p_e_list) + "\n")
    for p_b, row in zip(p_b_list, matrix):
        buf.write(str(p_b) + "," + ",".join(format_beta(b, trials) for b in row) + "\n")
    return buf.getvalue()


DIST_DEFAULT_P = [round(0.1 + 0.05 * k, 2) for k in range(17)]  # 0.1, 0.15, ..., 0.9


def distribution_run(
    n: int,
    p_list: list[float],
    trials: int,
    seed: int,
    jobs: int = 1,
    cache=None,
) -> tuple[dict[float, newman_ziff.MaxClusterDistribution], list[tuple[float, int, int]]]:
    """Survival function per density plus (p, 0.95-, 0.99-quantile) summary rows."""
    micro = mctest.load_or_sweep(n, trials, seed, jobs=jobs, cache=cache)
    dists = {}
    quantiles = []
    for p in p_list:
        dist = micro.canonical(p)
        dists[p] = dist
        quantiles.append((p, dist.quantile(0.95), dist.quantile(0.99)))
    return dists, quantiles


def quantiles_csv(rows: list[tuple[float, int, int]]) -> str:
    buf = StringIO()
    buf.write("p_E,q95,q99\n")
    for p, q95, q99 in rows:
        buf.write(f"{p},{q95},{q99}\n")
    return buf.getvalue()


@dataclass
class BenchRow:
    side: int
    seconds: float
    sites_per_second: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    exponent: float  # fitted slope of log(time) vs log(side)

    def to_dict(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "exponent": self.exponent,
        }


_GAUSS = gaussian_model()


def _detect_once(lattice: TriangularLattice, seed: int) -> float:
    spec = SignalSpec(support=SiteMask.empty(lattice.side))
    start = time.perf_counter()
    fld = synthesize(spec, _GAUSS, lattice, seed)
    bits = threshold(fld, 0.25)
    max_cluster_size(bits, lattice)
    return time.perf_counter() - start


def bench(sides: list[int], seed: int = 1, reps: int = 3) -> BenchReport:
    """Wall-clock of a full detection (synthesize + threshold + exact labeling)
    per lattice side; fits the scaling exponent of time against side."""
    if len(sides) < 2:
        raise ValueError("need at least two sides to fit an exponent")
    warm = build_lattice(min(32, min(sides)))
    _detect_once(warm, seed)  # compile + touch caches outside the timed region
    rows = []
    for side in sides:
        lattice = build_lattice(side)
        best = min(_detect_once(lattice, seed + r) for r in range(reps))
        rows.append(BenchRow(side, best, lattice.site_count / best))
    fit = linregress(
        np.log([r.side for r in rows]), np.log([r.seconds for r in rows])
    )
    return BenchReport(rows, float(fit.slope))


def field_from_image(arr: np.ndarray, maxval: int) -> GrayField:
    """Map integer gray levels g in [0, maxval] linearly onto [0, 1]."""
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"image must be square, got shape {arr.shape}")
    values = arr.astype(np.float64) / float(maxval)
    return GrayField(arr.shape[0], values.reshape(-1))

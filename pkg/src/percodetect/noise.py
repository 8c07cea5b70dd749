"""Signal-plus-noise model: Y(s) = a * 1_support(s) + sigma * eps(s).

Noise families are zero-mean, unit-variance, and symmetric; a model is usable
for detection only if it is also non-degenerate at its median m (the CDF either
jumps at m or has positive density there), which guarantees that thresholding
at tau = sigma * m + 1/2 yields black-pixel probabilities strictly straddling
1/2 on and off the support.

Synthesis draws are counter-based: site i's value is a deterministic function
of (seed, i) via the Philox generator and inverse-CDF sampling, so fields are
reproducible independently of evaluation order or scheduling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtr, ndtri

from .lattice import SiteMask, TriangularLattice

SQRT3 = math.sqrt(3.0)
_LAPLACE_B = 1.0 / math.sqrt(2.0)  # variance 2 b^2 = 1
QUANTILE_KNOTS = 1024


@dataclass(frozen=True)
class NoiseModel:
    """A noise distribution given by its CDF and quantile function.

    family: one of "gaussian", "laplace", "uniform", "two_point", "table".
    For "table", ``quantile_table`` holds QUANTILE_KNOTS values of the
    quantile function at u_k = (k + 1/2) / KNOTS; the table is mirrored to
    enforce symmetry and rescaled to unit variance at construction.
    """

    family: str
    quantile_table: Optional[np.ndarray] = field(default=None, repr=False)

    _FAMILIES = ("gaussian", "laplace", "uniform", "two_point", "table")

    def __post_init__(self) -> None:
        if self.family not in self._FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.family == "table":
            if self.quantile_table is None:
                raise ValueError("table models need a quantile_table")
            tab = np.asarray(self.quantile_table, dtype=np.float64)
            if tab.shape != (QUANTILE_KNOTS,) or not np.all(np.isfinite(tab)):
                raise ValueError(f"quantile_table must hold {QUANTILE_KNOTS} finite knots")
            if np.any(np.diff(tab) < 0):
                raise ValueError("quantile_table must be nondecreasing")
            # mirror (symmetry by construction), then rescale to unit variance
            tab = 0.5 * (tab - tab[::-1])
            var = _table_variance(tab)
            if var <= 0:
                raise ValueError("quantile_table is degenerate (zero variance)")
            object.__setattr__(self, "quantile_table", tab / math.sqrt(var))
        elif self.quantile_table is not None:
            raise ValueError("quantile_table only applies to the 'table' family")

    # --- distribution functions -------------------------------------------------

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.family == "gaussian":
            return ndtr(x)
        if self.family == "laplace":
            return np.where(x < 0, 0.5 * np.exp(x / _LAPLACE_B), 1.0 - 0.5 * np.exp(-x / _LAPLACE_B))
        if self.family == "uniform":
            return np.clip((x + SQRT3) / (2.0 * SQRT3), 0.0, 1.0)
        if self.family == "two_point":
            return np.where(x < -1.0, 0.0, np.where(x < 1.0, 0.5, 1.0))
        return _table_cdf(self.quantile_table, x)

    def quantile(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise ValueError("quantile arguments must lie in (0, 1)")
        if self.family == "gaussian":
            return ndtri(u)
        if self.family == "laplace":
            return np.where(u < 0.5, _LAPLACE_B * np.log(2.0 * u), -_LAPLACE_B * np.log(2.0 * (1.0 - u)))
        if self.family == "uniform":
            return (2.0 * u - 1.0) * SQRT3
        if self.family == "two_point":
            return np.where(u < 0.5, -1.0, 1.0)
        knots = (np.arange(QUANTILE_KNOTS) + 0.5) / QUANTILE_KNOTS
        return np.interp(u, knots, self.quantile_table)

    @property
    def median(self) -> float:
        return 0.0  # all families are symmetric around 0 by construction

    @property
    def symmetric(self) -> bool:
        return True

    def tail_prob(self, x) -> np.ndarray:
        """P(eps > x) = 1 - F(x); correct also for atomic distributions."""
        return 1.0 - self.cdf(x)

    # --- serialization ------------------------------------------------------------

    def to_json(self) -> str:
        obj = {"family": self.family, "params": {}}
        if self.family == "table":
            obj["quantile_table"] = [float(v) for v in self.quantile_table]
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        obj = json.loads(text)
        table = obj.get("quantile_table")
        return cls(obj["family"], None if table is None else np.asarray(table, dtype=np.float64))


def _table_variance(tab: np.ndarray) -> float:
    # the table describes the distribution of Q(U), U uniform; knots are
    # equi-probable so the sample second moment converges at O(KNOTS^-2)
    return float(np.mean(tab * tab))


def _table_cdf(tab: np.ndarray, x) -> np.ndarray:
    knots = (np.arange(QUANTILE_KNOTS) + 0.5) / QUANTILE_KNOTS
    return np.interp(x, tab, knots, left=0.0, right=1.0)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[str, ...]
    median: float
    variance: float
    nondegeneracy: Optional[str]  # "jump" | "density" | None


def validate_noise(model: NoiseModel, tol: float = 1e-6) -> ValidationReport:
    """Check symmetry, unit variance, and non-degeneracy at the median.

    Non-degeneracy requires either a CDF jump at m, or positive density at m.
    The two-point +-1 model fails it: its CDF is flat on a neighborhood of 0,
    so no threshold near sigma*m can separate the black-pixel probabilities.
    """
    violations: list[str] = []

    grid = np.linspace(1e-6, 12.0, 4001)
    asym = np.max(np.abs(model.cdf(-grid) - model.tail_prob(grid)))
    if asym > 1e-9:
        violations.append("symmetry")

    variance = _model_variance(model)
    vtol = tol if model.family != "table" else 5e-3  # tables are approximations
    if abs(variance - 1.0) > vtol:
        violations.append("variance")

    m = model.median
    h = 1e-7
    jump = float(model.cdf(m) - model.cdf(m - 1e-12))
    slope = float((model.cdf(m + h) - model.cdf(m - h)) / (2 * h))
    if jump > tol:
        mode = "jump"
    elif slope > tol:
        mode = "density"
    else:
        mode = None
        violations.append("degenerate")

    return ValidationReport(not violations, tuple(violations), m, variance, mode)


def _model_variance(model: NoiseModel) -> float:
    if model.family in ("gaussian", "laplace", "uniform", "two_point"):
        return 1.0  # closed form by construction
    return _table_variance(model.quantile_table)


def gaussian_model() -> NoiseModel:
    return NoiseModel("gaussian")


@dataclass
class GrayField:
    """Real-valued observed image over the lattice sites (row-major)."""

    side: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.side * self.side)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("gray field values must be finite")


@dataclass
class BinaryField:
    """0/1 configuration over the lattice sites (1 = black/occupied)."""

    side: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.dtype != np.uint8:
            if not np.isin(b, (0, 1)).all():
                raise ValueError("binary field bits must be 0 or 1")
            b = b.astype(np.uint8)
        self.bits = b.reshape(self.side * self.side)

    def black_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class SignalSpec:
    """Constant-amplitude signal on a support, observed at noise scale sigma."""

    support: SiteMask
    amplitude: float = 1.0
    noise_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.noise_scale <= 0:
            raise ValueError("noise scale sigma must be > 0")


def site_uniforms(seed: int, count: int) -> np.ndarray:
    """Open-interval uniforms; value i depends only on (seed, i)."""
    raw = Generator(Philox(key=np.uint64(seed))).integers(
        0, 2**64, size=count, dtype=np.uint64, endpoint=False
    )
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def synthesize(
    spec: SignalSpec, model: NoiseModel, lattice: TriangularLattice, seed: int
) -> GrayField:
    """Draw Y(s) = a * 1_support(s) + sigma * eps(s), deterministic in seed."""
    if spec.support.side != lattice.side:
        raise ValueError("support mask side does not match the lattice")
    u = site_uniforms(seed, lattice.site_count)
    eps = model.quantile(u)
    values = spec.noise_scale * eps
    values[spec.support.bits] += spec.amplitude
    return GrayField(lattice.side, values)


def threshold(fld: GrayField, tau: float) -> BinaryField:
    """Black iff Y(s) > tau (strictly); ties go white."""
    return BinaryField(fld.side, (fld.values > tau).astype(np.uint8))


def occupancy_probabilities(
    model: NoiseModel, tau: float, sigma: float, amplitude: float
) -> tuple[float, float]:
    """(p0, p1): black-pixel probability on and off the support.

    p0 = P(eps > (tau - a) / sigma), p1 = P(eps > tau / sigma).
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    p0 = float(model.tail_prob((tau - amplitude) / sigma))
    p1 = float(model.tail_prob(tau / sigma))
    return p0, p1


def choose_threshold(model: NoiseModel, sigma: float) -> float:
    """tau = sigma * m + 1/2; with symmetric noise (m = 0) this is 1/2.

    For amplitude-1 signals this threshold makes the on-support black
    probability exceed 1/2 and the off-support one fall below 1/2, i.e. it
    straddles the critical probability of the triangular lattice.
    """
    report = validate_noise(model)
    if not report.valid:
        raise ValueError(f"noise model rejected: {', '.join(report.violations)}")
    return sigma * report.median + 0.5

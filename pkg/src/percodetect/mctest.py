"""The maximum-cluster detection test.

Decision rule: threshold the gray image at tau, find the largest black
cluster T on the triangular lattice, reject the noise-only hypothesis iff
T >= c0.  The critical value c0 comes either from Monte Carlo calibration
(``calibrate``, finite-sample, the default) or from the logarithmic growth
rule ``phi_log`` (asymptotic consistency mode).  Everything downstream of the
decision — threshold scans, Monte Carlo error estimation, analytic rate
bounds — lives here too.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import ndtr
from scipy.stats import linregress

from ._rng import next_double, trial_seed, xoshiro_init
from .clusters import _find_at_least_kernel, find_cluster_at_least, max_cluster_size
from .lattice import SiteMask, TriangularLattice, build_lattice
from .newman_ziff import MaxClusterDistribution, MicroCanonicalTable, critical_value, sweep
from .noise import (
    GrayField,
    NoiseModel,
    SignalSpec,
    occupancy_probabilities,
    synthesize,
    threshold,
)

CACHE_ENV = "PERCODETECT_CACHE_DIR"
_Z95 = 1.959963984540054  # two-sided 95% normal quantile


# --------------------------------------------------------------------------- decisions


@dataclass
class DetectionReport:
    """Outcome of one test run.

    ``statistic`` is the size of the witnessing cluster; when
    ``early_stopped`` is true the search aborted mid-cluster, so it is a lower
    bound (still >= critical_value).  Otherwise it is the exact maximum.
    """

    decision: str  # "reject-H0" | "retain-H0"
    statistic: int
    critical_value: int
    tau: float
    side: int
    p_e: float | None = None
    early_stopped: bool = False
    p_value: float | None = None

    @property
    def rejected(self) -> bool:
        return self.decision == "reject-H0"

    def to_json(self) -> str:
        return json.dumps(
            {
                "decision": self.decision,
                "T": self.statistic,
                "c0": self.critical_value,
                "tau": self.tau,
                "N": self.side,
                "pE": self.p_e,
                "early_stopped": self.early_stopped,
                "p_value": self.p_value,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DetectionReport":
        d = json.loads(text)
        return cls(
            d["decision"],
            d["T"],
            d["c0"],
            d["tau"],
            d["N"],
            d.get("pE"),
            d.get("early_stopped", False),
            d.get("p_value"),
        )


def run_test(
    field: GrayField,
    tau: float,
    c0: int,
    lattice: TriangularLattice,
    dist: MaxClusterDistribution | None = None,
    early_stop: bool = True,
) -> DetectionReport:
    """Threshold at tau, test T >= c0.  Pure, single pass, O(N^2).

    With ``dist`` attached the exact statistic is always computed (no early
    stop) and an approximate p-value P(T >= t_obs) under the calibrated null
    is reported.
    """
    if c0 < 1:
        raise ValueError("critical value c0 must be >= 1")
    if field.side != lattice.side:
        raise ValueError(f"field side {field.side} does not match lattice side {lattice.side}")
    bits = threshold(field, tau)
    p_value = None
    if dist is not None or not early_stop:
        t_obs = max_cluster_size(bits, lattice)
        found = t_obs >= c0
        stopped = False
        if dist is not None:
            if dist.side != field.side:
                raise ValueError("calibration distribution side does not match the field")
            p_value = float(dist.survival[t_obs])
    else:
        found, t_obs = find_cluster_at_least(bits, lattice, c0)
        stopped = found
    decision = "reject-H0" if found else "retain-H0"
    return DetectionReport(
        decision,
        int(t_obs),
        int(c0),
        float(tau),
        field.side,
        dist.p if dist is not None else None,
        stopped,
        p_value,
    )


# --------------------------------------------------------------------------- calibration


def cache_dir(explicit: str | os.PathLike | None = None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "percodetect"


def load_or_sweep(
    n: int,
    trials: int,
    seed: int,
    jobs: int = 1,
    cache: str | os.PathLike | None = None,
    mode: str = "auto",
) -> MicroCanonicalTable:
    """Fetch the sweep table for (n, trials, seed) from cache, else compute it."""
    d = cache_dir(cache)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"nz_N{n}_R{trials}_s{seed}.nzmc"
    if path.exists():
        table = MicroCanonicalTable.load(path)
        if (table.side, table.trials, table.seed) == (n, trials, seed):
            return table
        warnings.warn(f"cache entry {path} is inconsistent; recomputing", RuntimeWarning)
    table = sweep(build_lattice(n), trials, seed, jobs=jobs, mode=mode)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(table.to_bytes())
        os.replace(tmp, path)  # atomic publish; concurrent writers race benignly
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return table


def calibrate(
    n: int,
    p_e: float,
    alpha: float,
    trials: int,
    seed: int,
    jobs: int = 1,
    cache: str | os.PathLike | None = None,
) -> tuple[int, dict]:
    """Critical value c0 for lattice side n at noise density p_e and level alpha.

    Returns (c0, table row).  The underlying sweep is cached keyed by
    (n, trials, seed); distinct (p_e, alpha) pairs reuse it for free.
    """
    if not 0.0 < p_e < 1.0:
        raise ValueError("p_e must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    table = load_or_sweep(n, trials, seed, jobs=jobs, cache=cache)
    c0 = critical_value(table.canonical(p_e), alpha)
    row = {"N": n, "p_E": p_e, "alpha": alpha, "c0": c0, "trials": trials, "seed": seed}
    return c0, row


def phi_log(n: float, k0: float) -> float:
    """Logarithmic critical-value growth k0 * ln(n) (consistency mode)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if k0 <= 0:
        raise ValueError("k0 must be > 0")
    return k0 * math.log(n)


def gaussian_rates(tau: float, sigma: float, a: float) -> tuple[float, float]:
    """(p_e, p_b): black-pixel probabilities off and on the support.

    p_e = P(sigma * eps > tau) = 1 - Phi(tau / sigma) and
    p_b = P(a + sigma * eps > tau) = Phi((a - tau) / sigma) for standard
    gaussian eps.  Detection needs p_b supercritical (> 1/2), which holds iff
    tau < a; a warning flags the degenerate configuration.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    p_e = float(ndtr(-tau / sigma))
    p_b = float(ndtr((a - tau) / sigma))
    if tau >= a:
        warnings.warn(
            f"tau = {tau} >= a = {a}: on-support density p_b = {p_b:.3f} is not "
            "supercritical, the object is invisible to the test",
            RuntimeWarning,
            stacklevel=2,
        )
    return p_e, p_b


# --------------------------------------------------------------------------- scan


@dataclass
class ScanStep:
    tau: float
    p_e: float
    c0: int
    statistic: int
    decision: str


@dataclass
class ScanReport:
    steps: list[ScanStep]
    stopped: str  # "reject" | "tau-floor" | "exhausted"
    tests_performed: int  # multiplicity is reported, not corrected for

    @property
    def rejected(self) -> bool:
        return self.stopped == "reject"

    def to_json(self) -> str:
        return json.dumps(
            {
                "steps": [vars(s) for s in self.steps],
                "stopped": self.stopped,
                "tests_performed": self.tests_performed,
            }
        )


def threshold_scan(
    field: GrayField,
    schedule,
    tau0: float,
    alpha: float,
    trials: int,
    seed: int,
    noise: NoiseModel | None = None,
    sigma: float = 1.0,
    p_e: list[float] | None = None,
    jobs: int = 1,
    cache: str | os.PathLike | None = None,
) -> ScanReport:
    """Run the test over a decreasing threshold schedule, stopping early.

    Each tau gets its own critical value, calibrated at the noise density
    p_e(tau) — derived from ``noise`` (at scale sigma), or supplied explicitly
    per tau when the noise law is unknown.  The scan stops at the first
    rejection or once tau drops below the floor tau0.  No multiplicity
    correction is applied; the report carries the number of tests performed
    so callers can account for it.
    """
    schedule = [float(t) for t in schedule]
    if not schedule:
        raise ValueError("threshold schedule is empty")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("threshold schedule must be strictly decreasing")
    if tau0 < 0:
        raise ValueError("tau0 must be >= 0")
    if p_e is None:
        if noise is None:
            raise ValueError("supply a noise model or explicit per-tau p_e estimates")
        p_e = [float(noise.tail_prob(t / sigma)) for t in schedule]
    else:
        p_e = [float(x) for x in p_e]
        if len(p_e) != len(schedule):
            raise ValueError("p_e list must match the schedule length")
    lattice = build_lattice(field.side)
    steps: list[ScanStep] = []
    stopped = "exhausted"
    for tau, pe in zip(schedule, p_e):
        if tau < tau0:
            stopped = "tau-floor"
            break
        c0, _ = calibrate(field.side, pe, alpha, trials, seed, jobs=jobs, cache=cache)
        report = run_test(field, tau, c0, lattice)
        steps.append(ScanStep(tau, pe, c0, report.statistic, report.decision))
        if report.rejected:
            stopped = "reject"
            break
    return ScanReport(steps, stopped, len(steps))


# --------------------------------------------------------------------------- error rates


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


@njit(cache=True, nogil=True)
def _reject_rate_kernel(nbr, deg, on_support, p_on, p_off, bound, trial_lo, trial_hi, master_seed):
    m = deg.shape[0]
    bits = np.empty(m, dtype=np.uint8)
    visited = np.empty(m, dtype=np.uint8)
    stack = np.empty(m, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    rejects = 0
    for trial in range(trial_lo, trial_hi):
        xoshiro_init(trial_seed(master_seed, trial), state)
        for i in range(m):
            p = p_on if on_support[i] == 1 else p_off
            bits[i] = 1 if next_double(state) < p else 0
            visited[i] = 0
        found, _size = _find_at_least_kernel(bits, nbr, deg, bound, visited, stack)
        if found:
            rejects += 1
    return rejects


def rejection_rate(
    lattice: TriangularLattice,
    support: SiteMask | None,
    p_on: float,
    p_off: float,
    c0: int,
    trials: int,
    seed: int,
    jobs: int = 1,
) -> int:
    """Count of trials with T >= c0 when sites are black with probability
    p_on on the support and p_off elsewhere.  Trial i is keyed by (seed, i),
    so the count is independent of the job split."""
    if not (0.0 <= p_on <= 1.0 and 0.0 <= p_off <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if c0 < 1:
        raise ValueError("c0 must be >= 1")
    m = lattice.site_count
    if support is None:
        on = np.zeros(m, dtype=np.uint8)
    else:
        if support.side != lattice.side:
            raise ValueError("support mask side does not match the lattice")
        on = support.bits.astype(np.uint8)
    nbr, deg = lattice.neighbor_arrays()
    jobs = max(1, min(jobs, trials))
    cuts = np.linspace(0, trials, jobs + 1).astype(np.int64)
    parts = [(int(cuts[i]), int(cuts[i + 1])) for i in range(jobs) if cuts[i] < cuts[i + 1]]

    def run(lohi):
        return _reject_rate_kernel(
            nbr, deg, on, p_on, p_off, c0, lohi[0], lohi[1], np.uint64(seed)
        )

    if len(parts) == 1:
        return int(run(parts[0]))
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        return int(sum(pool.map(run, parts)))


@dataclass(frozen=True)
class ErrorScenario:
    """One Monte Carlo error-rate experiment: signal + noise + test settings."""

    signal: SignalSpec
    noise: NoiseModel
    tau: float
    c0: int

    @property
    def side(self) -> int:
        return self.signal.support.side

    @property
    def is_null(self) -> bool:
        return self.signal.amplitude == 0.0 or len(self.signal.support) == 0


@dataclass
class ErrorEstimate:
    kind: str  # "alpha" (false detection) | "beta" (missed detection)
    rate: float
    ci_low: float
    ci_high: float
    trials: int
    rejections: int

    @property
    def ci(self) -> tuple[float, float]:
        return (self.ci_low, self.ci_high)


def estimate_errors(
    scenario: ErrorScenario,
    trials: int,
    seed: int,
    jobs: int = 1,
    mode: str = "direct",
) -> ErrorEstimate:
    """Monte Carlo alpha-hat (null scenarios) or beta-hat (signal scenarios).

    mode="synthesize" runs the literal pipeline per trial: draw gray values,
    threshold at tau, test.  mode="direct" collapses the first two stages to
    their exact Bernoulli image — site black with probability p_on / p_off
    from the noise tail — and runs in a compiled kernel; the two modes
    estimate the same rate.  Both key trial i by (seed, i), so results do not
    depend on the partitioning.  The 95% interval is Wilson's.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    lattice = build_lattice(scenario.side)
    if mode == "direct":
        p_on, p_off = occupancy_probabilities(
            scenario.noise, scenario.tau, scenario.signal.noise_scale, scenario.signal.amplitude
        )
        rejects = rejection_rate(
            lattice, scenario.signal.support, p_on, p_off, scenario.c0, trials, seed, jobs=jobs
        )
    elif mode == "synthesize":
        def run(lohi):
            count = 0
            for i in range(lohi[0], lohi[1]):
                fld = synthesize(
                    scenario.signal, scenario.noise, lattice, int(trial_seed(seed, i))
                )
                found, _ = find_cluster_at_least(threshold(fld, scenario.tau), lattice, scenario.c0)
                count += found
            return count

        jobs_eff = max(1, min(jobs, trials))
        cuts = np.linspace(0, trials, jobs_eff + 1).astype(np.int64)
        parts = [(int(cuts[i]), int(cuts[i + 1])) for i in range(jobs_eff) if cuts[i] < cuts[i + 1]]
        if len(parts) == 1:
            rejects = run(parts[0])
        else:
            with ThreadPoolExecutor(max_workers=len(parts)) as pool:
                rejects = sum(pool.map(run, parts))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if scenario.is_null:
        errors = rejects
        kind = "alpha"
    else:
        errors = trials - rejects
        kind = "beta"
    lo, hi = wilson_interval(errors, trials)
    return ErrorEstimate(kind, errors / trials, lo, hi, trials, int(rejects))


# --------------------------------------------------------------------------- bounds


@dataclass(frozen=True)
class RateBoundParams:
    """Constants of the asymptotic error bounds.

    All are existential in the theory; defaults must be fitted empirically
    (``fit_lambda`` for lam) and are reported alongside any bound they enter.
    rho is the side of the guaranteed supercritical square; when omitted it
    defaults to k0 * ln(N), the same growth as the critical value.
    """

    k0: float
    c: float
    lam: float
    d: float
    c1: float
    c2: float
    rho: float | None = None

    def __post_init__(self) -> None:
        for name in ("k0", "c", "lam", "d", "c1", "c2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be > 0")


@dataclass(frozen=True)
class RateBounds:
    alpha_bound: float  # exp(-c2 * phi(N))
    beta_bound: float  # exp(-c1 * rho(N))
    expo_finite: float  # N^(-2(c*lam - 1)), the finite-N false-alarm size


def rate_bounds(params: RateBoundParams, n: int) -> RateBounds:
    """Evaluate the exponential error bounds at lattice side n.

    Valid only in the asymptotic regime: c * lam > 1 and n large enough that
    the logarithmic scales phi(n), rho(n) fit inside the lattice.
    """
    if params.c * params.lam <= 1.0:
        raise ValueError("c * lam must exceed 1 for the false-alarm bound to apply")
    phi = phi_log(n, params.k0)
    rho = params.rho if params.rho is not None else params.k0 * math.log(n)
    if n <= phi:
        raise ValueError(f"n = {n} must exceed phi(n) = {phi:.1f}")
    if n <= rho:
        raise ValueError(f"n = {n} must exceed rho(n) = {rho:.1f}")
    alpha_bound = math.exp(-params.c2 * phi)
    beta_bound = math.exp(-params.c1 * rho)
    expo_finite = n ** (2.0 * (1.0 - params.c * params.lam))
    return RateBounds(alpha_bound, beta_bound, expo_finite)


@dataclass(frozen=True)
class LambdaFit:
    lam: float
    intercept: float
    r_squared: float
    t_lo: int
    t_hi: int
    points: int


def fit_lambda(
    dist: MaxClusterDistribution,
    s_hi: float = 0.5,
    s_lo: float | None = None,
) -> LambdaFit:
    """Exponential tail rate of T: slope of ln S(t) over the window
    s_lo <= S(t) <= s_hi.  Subcritical distributions give a clean line
    (lam > 0, R^2 near 1); the default floor keeps at least ~10 trials of
    Monte Carlo support under every point."""
    if s_lo is None:
        s_lo = max(10.0 / dist.trials, 1e-12)
    if not 0.0 < s_lo < s_hi <= 1.0:
        raise ValueError("require 0 < s_lo < s_hi <= 1")
    s = dist.survival
    t = np.arange(len(s))
    mask = (t >= 1) & (s >= s_lo) & (s <= s_hi)
    if mask.sum() < 3:
        raise ValueError("fewer than 3 points in the fitting window")
    res = linregress(t[mask], np.log(s[mask]))
    return LambdaFit(
        lam=float(-res.slope),
        intercept=float(res.intercept),
        r_squared=float(res.rvalue**2),
        t_lo=int(t[mask][0]),
        t_hi=int(t[mask][-1]),
        points=int(mask.sum()),
    )

import json
import math

import numpy as np
import pytest
from scipy.special import ndtr

from percodetect import mctest
from percodetect.bounds import false_alarm_exact_vs_leading
from percodetect.lattice import SiteMask, TriangularLattice, centered_square
from percodetect.mctest import (
    DetectionReport,
    ErrorScenario,
    RateBoundParams,
    calibrate,
    estimate_errors,
    fit_lambda,
    gaussian_rates,
    load_or_sweep,
    phi_log,
    rate_bounds,
    rejection_rate,
    run_test,
    threshold_scan,
    wilson_interval,
)
from percodetect.newman_ziff import MaxClusterDistribution
from percodetect.noise import GrayField, SignalSpec, gaussian_model, synthesize, threshold


@pytest.fixture
def lat():
    return TriangularLattice(12)


def blob_field(side, square, value=5.0):
    """Deterministic field: a bright centered square on a dark background."""
    lat = TriangularLattice(side)
    values = np.full(side * side, -1.0)
    values[centered_square(lat, square).bits] = value
    return GrayField(side, values)


# ---------------------------------------------------------------- run_test


def test_run_test_reject_and_retain(lat):
    fld = blob_field(12, 5)
    hit = run_test(fld, 0.5, 25, lat)
    assert hit.rejected and hit.decision == "reject-H0"
    assert hit.early_stopped and hit.statistic >= 25

    miss = run_test(fld, 0.5, 26, lat)
    assert not miss.rejected and miss.decision == "retain-H0"
    # no early stop fired, so the statistic is the exact maximum: the square
    assert not miss.early_stopped and miss.statistic == 25


def test_run_test_exact_mode_same_decision(lat):
    rng = np.random.default_rng(0)
    for seed in range(20):
        fld = GrayField(12, rng.normal(size=144))
        c0 = int(rng.integers(1, 40))
        fast = run_test(fld, 0.3, c0, lat)
        slow = run_test(fld, 0.3, c0, lat, early_stop=False)
        assert fast.rejected == slow.rejected
        assert not slow.early_stopped
        if fast.rejected:
            assert fast.statistic >= c0
        else:
            assert fast.statistic == slow.statistic  # both exact maxima


def test_run_test_p_value(lat):
    micro = mctest.load_or_sweep(12, 2_000, 99, cache=None)
    dist = micro.canonical(0.5)
    fld = blob_field(12, 4)
    rep = run_test(fld, 0.5, 10, lat, dist=dist)
    assert rep.p_value == pytest.approx(float(dist.survival[rep.statistic]))
    assert rep.p_e == 0.5
    assert not rep.early_stopped  # exact statistic whenever a dist is attached

    with pytest.raises(ValueError, match="side"):
        run_test(blob_field(10, 3), 0.5, 5, lat)
    with pytest.raises(ValueError):
        run_test(fld, 0.5, 0, lat)
    with pytest.raises(ValueError, match="distribution side"):
        run_test(fld, 0.5, 5, lat, dist=MaxClusterDistribution(3, 0.5, 10, np.linspace(1, 0, 11)))


def test_detection_report_json_roundtrip():
    rep = DetectionReport("reject-H0", 901, 620, 0.25, 55, 0.46, True, None)
    back = DetectionReport.from_json(rep.to_json())
    assert back == rep
    keys = set(json.loads(rep.to_json()))
    assert keys == {"decision", "T", "c0", "tau", "N", "pE", "early_stopped", "p_value"}


# ---------------------------------------------------------------- calibration & cache


def test_load_or_sweep_caches(tmp_path):
    table = load_or_sweep(9, 500, 7, cache=tmp_path)
    path = tmp_path / "nz_N9_R500_s7.nzmc"
    assert path.exists()
    stamp = path.stat().st_mtime_ns
    again = load_or_sweep(9, 500, 7, cache=tmp_path)
    assert path.stat().st_mtime_ns == stamp  # served from disk, not rebuilt
    np.testing.assert_array_equal(again.first_counts, table.first_counts)


def test_load_or_sweep_heals_bad_cache_entry(tmp_path):
    # a file whose contents do not match its name must be recomputed
    wrong = load_or_sweep(6, 300, 1, cache=tmp_path)
    (tmp_path / "nz_N7_R300_s1.nzmc").write_bytes(wrong.to_bytes())
    with pytest.warns(RuntimeWarning, match="inconsistent"):
        healed = load_or_sweep(7, 300, 1, cache=tmp_path)
    assert healed.side == 7


def test_calibrate_matches_definition(tmp_path):
    c0, row = calibrate(12, 0.5, 0.05, 2_000, 31, cache=tmp_path)
    table = load_or_sweep(12, 2_000, 31, cache=tmp_path)
    assert c0 == table.canonical(0.5).critical_value(0.05)
    assert row == {"N": 12, "p_E": 0.5, "alpha": 0.05, "c0": c0, "trials": 2_000, "seed": 31}
    with pytest.raises(ValueError):
        calibrate(12, 0.0, 0.05, 100, 1, cache=tmp_path)
    with pytest.raises(ValueError):
        calibrate(12, 0.5, 1.0, 100, 1, cache=tmp_path)


def test_phi_log():
    assert phi_log(math.e, 5.0) == pytest.approx(5.0)
    assert phi_log(64, 2.0) == pytest.approx(2.0 * math.log(64))
    assert phi_log(128, 2.0) > phi_log(64, 2.0)
    with pytest.raises(ValueError):
        phi_log(1, 2.0)
    with pytest.raises(ValueError):
        phi_log(10, 0.0)


def test_gaussian_rates_formulas():
    p_e, p_b = gaussian_rates(0.5, 1.0, 1.0)
    assert p_e == pytest.approx(1.0 - ndtr(0.5), rel=1e-12)
    assert p_b == pytest.approx(ndtr(0.5), rel=1e-12)
    assert p_e < 0.5 < p_b
    with pytest.warns(RuntimeWarning, match="not.*supercritical|invisible"):
        gaussian_rates(1.0, 1.0, 0.8)
    with pytest.raises(ValueError):
        gaussian_rates(0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        gaussian_rates(-0.1, 1.0, 1.0)


# ---------------------------------------------------------------- scan


def test_threshold_scan_stops_at_first_rejection(tmp_path, lat):
    fld = blob_field(12, 6, value=3.0)
    report = threshold_scan(
        fld, [2.0, 1.0, 0.5], tau0=0.0, alpha=0.05, trials=1_000, seed=3,
        p_e=[0.02, 0.16, 0.31], cache=tmp_path,
    )
    assert report.rejected and report.stopped == "reject"
    assert report.tests_performed == len(report.steps)
    assert report.steps[-1].decision == "reject-H0"
    back = json.loads(report.to_json())
    assert back["stopped"] == "reject"
    assert len(back["steps"]) == report.tests_performed


def test_threshold_scan_floor_and_exhaustion(tmp_path):
    quiet = GrayField(12, np.full(144, -10.0))  # nothing ever exceeds tau
    floor = threshold_scan(
        quiet, [2.0, 1.0, 0.2], tau0=0.5, alpha=0.05, trials=1_000, seed=3,
        p_e=[0.02, 0.16, 0.42], cache=tmp_path,
    )
    assert floor.stopped == "tau-floor" and floor.tests_performed == 2

    done = threshold_scan(
        quiet, [2.0, 1.0], tau0=0.5, alpha=0.05, trials=1_000, seed=3,
        p_e=[0.02, 0.16], cache=tmp_path,
    )
    assert done.stopped == "exhausted" and done.tests_performed == 2
    assert not done.rejected


def test_threshold_scan_noise_model_route(tmp_path):
    quiet = GrayField(12, np.full(144, -10.0))
    report = threshold_scan(
        quiet, [1.0], tau0=0.0, alpha=0.05, trials=1_000, seed=5,
        noise=gaussian_model(), cache=tmp_path,
    )
    assert report.steps[0].p_e == pytest.approx(1.0 - ndtr(1.0), rel=1e-12)


def test_threshold_scan_validation(tmp_path):
    fld = GrayField(5, np.zeros(25))
    with pytest.raises(ValueError, match="empty"):
        threshold_scan(fld, [], 0.0, 0.05, 100, 1, p_e=[], cache=tmp_path)
    with pytest.raises(ValueError, match="decreasing"):
        threshold_scan(fld, [1.0, 1.0], 0.0, 0.05, 100, 1, p_e=[0.2, 0.2], cache=tmp_path)
    with pytest.raises(ValueError, match="noise model or explicit"):
        threshold_scan(fld, [1.0], 0.0, 0.05, 100, 1, cache=tmp_path)
    with pytest.raises(ValueError, match="match the schedule"):
        threshold_scan(fld, [1.0, 0.5], 0.0, 0.05, 100, 1, p_e=[0.2], cache=tmp_path)
    with pytest.raises(ValueError):
        threshold_scan(fld, [1.0], -0.5, 0.05, 100, 1, p_e=[0.2], cache=tmp_path)


# ---------------------------------------------------------------- error rates


def test_wilson_interval_values():
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.2366, abs=2e-4)
    assert hi == pytest.approx(0.7634, abs=2e-4)
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0
    assert wilson_interval(0, 50)[1] > 0.0
    with pytest.raises(ValueError):
        wilson_interval(5, 0)
    with pytest.raises(ValueError):
        wilson_interval(11, 10)


def test_rejection_rate_scheduling_invariance(lat):
    sup = centered_square(lat, 4)
    a = rejection_rate(lat, sup, 0.7, 0.3, 28, 400, seed=6, jobs=1)
    b = rejection_rate(lat, sup, 0.7, 0.3, 28, 400, seed=6, jobs=4)
    assert a == b
    assert 0 < a < 400
    with pytest.raises(ValueError):
        rejection_rate(lat, sup, 1.5, 0.2, 10, 100, 1)
    with pytest.raises(ValueError):
        rejection_rate(lat, sup, 0.5, 0.2, 0, 100, 1)
    with pytest.raises(ValueError):
        rejection_rate(lat, centered_square(TriangularLattice(10), 3), 0.5, 0.2, 5, 100, 1)


def test_rejection_rate_null_support(lat):
    # support=None is pure noise; degenerate densities give certain answers
    assert rejection_rate(lat, None, 0.0, 1.0, 1, 50, 1) == 50
    assert rejection_rate(lat, None, 0.0, 0.0, 1, 50, 1) == 0


def test_estimate_errors_kinds(lat):
    noise = gaussian_model()
    null = ErrorScenario(SignalSpec(SiteMask.empty(12), amplitude=0.0), noise, 0.5, 20)
    alt = ErrorScenario(SignalSpec(centered_square(lat, 6), amplitude=2.0), noise, 0.5, 20)
    assert null.is_null and not alt.is_null

    a = estimate_errors(null, 500, seed=2)
    assert a.kind == "alpha" and a.rejections <= 500
    assert a.ci_low <= a.rate <= a.ci_high

    b = estimate_errors(alt, 500, seed=2)
    assert b.kind == "beta"
    assert b.rate == pytest.approx(1.0 - b.rejections / 500)

    with pytest.raises(ValueError):
        estimate_errors(null, 99, seed=1)
    with pytest.raises(ValueError):
        estimate_errors(null, 500, seed=1, mode="guess")


def test_estimate_errors_dual_route_agreement(lat):
    """The compiled Bernoulli shortcut and the literal synthesize pipeline
    must estimate the same rate: they realize the same distribution."""
    scenario = ErrorScenario(
        SignalSpec(centered_square(lat, 5), amplitude=1.0), gaussian_model(), 0.5, 18
    )
    direct = estimate_errors(scenario, 3_000, seed=11, jobs=2, mode="direct")
    literal = estimate_errors(scenario, 3_000, seed=11, jobs=2, mode="synthesize")
    p = 0.5 * (direct.rate + literal.rate)
    se = math.sqrt(2.0 * max(p * (1 - p), 1e-9) / 3_000)
    assert abs(direct.rate - literal.rate) < 4 * se


# ---------------------------------------------------------------- asymptotic bounds


def test_rate_bounds_values():
    params = RateBoundParams(k0=2.0, c=1.0, lam=2.0, d=0.1, c1=0.5, c2=0.7)
    out = rate_bounds(params, 100)
    phi = 2.0 * math.log(100)
    assert out.alpha_bound == pytest.approx(math.exp(-0.7 * phi), rel=1e-12)
    assert out.beta_bound == pytest.approx(math.exp(-0.5 * phi), rel=1e-12)
    # the finite-N false-alarm size is the SAME expression the asymptotics
    # module calls "leading": bitwise equality, not just approximate
    assert out.expo_finite == false_alarm_exact_vs_leading(100, 1.0, 2.0)[1]

    explicit = rate_bounds(RateBoundParams(2.0, 1.0, 2.0, 0.1, 0.5, 0.7, rho=30.0), 100)
    assert explicit.beta_bound == pytest.approx(math.exp(-0.5 * 30.0), rel=1e-12)


def test_rate_bounds_domain():
    with pytest.raises(ValueError, match="exceed 1"):
        rate_bounds(RateBoundParams(2.0, 0.5, 2.0, 0.1, 0.5, 0.7), 100)
    with pytest.raises(ValueError, match="phi"):
        rate_bounds(RateBoundParams(50.0, 1.0, 2.0, 0.1, 0.5, 0.7), 100)
    with pytest.raises(ValueError, match="rho"):
        rate_bounds(RateBoundParams(2.0, 1.0, 2.0, 0.1, 0.5, 0.7, rho=200.0), 100)
    with pytest.raises(ValueError):
        RateBoundParams(0.0, 1.0, 2.0, 0.1, 0.5, 0.7)
    with pytest.raises(ValueError):
        RateBoundParams(2.0, 1.0, 2.0, 0.1, 0.5, 0.7, rho=-1.0)


# ---------------------------------------------------------------- tail fit


def test_fit_lambda_subcritical(table55):
    fit = fit_lambda(table55.canonical(0.3))
    assert fit.lam > 0
    assert fit.r_squared > 0.99
    assert fit.t_lo >= 1 and fit.t_hi > fit.t_lo
    assert fit.points >= 10


def test_fit_lambda_windows_and_errors(table55):
    dist = table55.canonical(0.3)
    narrow = fit_lambda(dist, s_hi=0.3, s_lo=0.01)
    assert narrow.points < fit_lambda(dist).points
    with pytest.raises(ValueError):
        fit_lambda(dist, s_hi=0.5, s_lo=0.5)
    steep = MaxClusterDistribution(3, 0.01, 1000, np.array([1.0] + [0.0] * 10))
    with pytest.raises(ValueError, match="fewer than 3"):
        fit_lambda(steep)

import numpy as np
import pytest

from classify import (AC_TYPE, EIGENVALUE_CANDIDATE, GROWING, SC_CANDIDATE, ScanRecord, ScanResult, classify_power,
                      fit_exponent, report, scan)
from config import RunConfig
from main import build_pipeline
from resonant_potential import embedded_eigenvalue_potential, wigner_von_neumann
from utils import read_csv
from weyl import MeasureGrid, truncated_spectral_function

NU = 1.5
TAU = 1.0


@pytest.fixture(scope="module")
def long_embedded():
    return embedded_eigenvalue_potential(NU, TAU, k_bar0=1.0, c=6.0, r_max=1500.0)


def test_classify_power_thresholds():
    assert classify_power(-0.8, 0.02) == EIGENVALUE_CANDIDATE
    assert classify_power(-0.3, 0.02) == SC_CANDIDATE
    assert classify_power(0.01, 0.02) == AC_TYPE
    assert classify_power(-0.02, 0.02) == AC_TYPE
    assert classify_power(0.4, 0.02) == GROWING


def test_fit_exponent_recovers_slope():
    r = np.geomspace(10.0, 1000.0, 200)
    slope, osc = fit_exponent(r, -1.2 * np.log(r) + 0.3)
    assert slope == pytest.approx(-1.2)
    assert osc == pytest.approx(0.0, abs=1e-10)


def test_free_potential_is_ac_everywhere(free_V):
    result = scan(free_V, np.linspace(1.2, 5.0, 12), r_max=1000.0)
    assert all(rec.cls == AC_TYPE for rec in result.records)
    assert np.all(np.abs(result.powers()) <= 1e-6)
    assert not any(rec.targeted for rec in result.records)


def test_scan_validation(free_V, embedded_V):
    with pytest.raises(ValueError):
        scan(free_V, [0.5, 2.0], r_max=1000.0)
    with pytest.raises(ValueError):
        scan(free_V, [2.0], r_max=500.0)
    with pytest.raises(ValueError):
        scan(embedded_V, [2.0], r_max=1000.0)


def test_embedded_eigenvalue_is_a_candidate(long_embedded):
    result = scan(long_embedded, [2.0], r_max=1000.0)
    record = result.records[0]
    assert record.targeted
    assert record.cls == EIGENVALUE_CANDIDATE
    assert record.power == pytest.approx(-1.5, rel=0.1)


def test_eigenvalue_candidate_matches_truncated_jump(long_embedded):
    result = scan(long_embedded, [2.0], r_max=1000.0)
    measure = truncated_spectral_function(long_embedded, L=200.0, edges=np.linspace(1.9, 2.1, 21))
    summary = report(result, measure)
    assert summary["counts"][EIGENVALUE_CANDIDATE] == 1
    entry = summary["eigenvalue_candidates"][0]
    assert entry["matched"]
    assert entry["nearest_eigenvalue"] == pytest.approx(2.0, abs=1e-3)
    assert entry["jump"] > 0


def test_scan_is_deterministic(long_embedded, tmp_path):
    energies = [1.8, 2.0, 2.6]
    first = scan(long_embedded, energies, r_max=1000.0)
    second = scan(long_embedded, energies, r_max=1000.0)
    assert first.to_frame().equals(second.to_frame())
    first.export(str(tmp_path / "scan.csv"), "abcd")
    frame = read_csv(str(tmp_path / "scan.csv"))
    assert list(frame.columns) == ["lambda", "kbar", "gamma", "osc", "targeted", "class"]
    assert frame["targeted"].tolist() == [0, 1, 0]


def test_report_counts_and_sc_flags():
    records = [
        ScanRecord(2.0, 1.0, -3.0, 0.1, True, EIGENVALUE_CANDIDATE),
        ScanRecord(2.5, 1.2247, -0.6, 0.1, False, SC_CANDIDATE),
        ScanRecord(3.0, 1.4142, 0.0, 0.1, False, AC_TYPE),
        ScanRecord(3.5, 1.5811, 0.01, 0.1, False, AC_TYPE),
    ]
    edges = np.linspace(1.9, 3.9, 5)
    measure = MeasureGrid(edges, np.ones(4), np.ones(4), np.zeros(4), np.ones(4), "stieltjes",
                          y_trend=np.array([0.0, 0.5, 0.0, 0.0]))
    summary = report(ScanResult(records, 1000.0, 0.02), measure)
    assert summary["counts"] == {EIGENVALUE_CANDIDATE: 1, SC_CANDIDATE: 1, AC_TYPE: 2, GROWING: 0}
    assert summary["median_power_targeted"] == pytest.approx(-1.5)
    assert summary["median_power_control"] == pytest.approx(0.0)
    assert summary["sc_candidates"] == [{"lambda": 2.5, "power": -0.3, "anomalous_cell": True}]
    assert summary["eigenvalue_candidates"][0]["cell"] == 0


def test_report_without_measure():
    records = [ScanRecord(3.0, 1.4142, 0.0, 0.1, False, AC_TYPE)]
    summary = report(ScanResult(records, 1000.0, 0.02))
    assert summary["median_power_targeted"] is None
    assert summary["eigenvalue_candidates"] == []


@pytest.mark.slow
def test_wigner_von_neumann_power():
    V = wigner_von_neumann(c=2.0, k_bar0=1.0, tau=TAU, nu=NU)
    record = scan(V, [2.0], r_max=3000.0).records[0]
    assert abs(record.power) == pytest.approx(0.5, rel=0.1)
    assert record.targeted


@pytest.mark.slow
def test_locked_dyadic_schedule_separates_targets(small_config):
    config = RunConfig.from_dict({**small_config, "r_max": 4000.0})
    V = build_pipeline(config, {}, solve=False).potential
    targets = np.array([1.25, 1.5, 1.75])
    controls = np.array([1.05, 1.4, 1.6, 1.95])
    result = scan(V, TAU**2 + np.concatenate([targets, controls]) ** 2, r_max=4000.0)
    assert np.median(result.powers(True)) <= -0.05
    assert abs(np.median(result.powers(False))) <= 0.02


def test_slow_locking_is_a_singular_continuous_candidate():
    # c < 2 k_bar0: R ~ r^(-1/4) is not square integrable
    V = embedded_eigenvalue_potential(NU, TAU, k_bar0=1.0, c=1.0, r_max=1500.0)
    record = scan(V, [2.0], r_max=1000.0).records[0]
    assert record.cls == SC_CANDIDATE
    assert record.power == pytest.approx(-0.25, abs=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("c,k_bar0", [(2.0, 1.0), (3.0, 1.5), (4.0, 1.0), (4.0, 2.0)])
def test_wigner_von_neumann_calibration(c, k_bar0):
    V = wigner_von_neumann(c=c, k_bar0=k_bar0, tau=TAU, nu=NU)
    on, off = scan(V, TAU**2 + np.array([k_bar0, 1.5 * k_bar0]) ** 2, r_max=3000.0).records
    expected = c / (4.0 * k_bar0)
    assert abs(on.power) == pytest.approx(expected, rel=0.1)
    assert abs(off.power) <= 0.02
    assert on.targeted and not off.targeted


@pytest.mark.slow
def test_resonance_signatures_at_full_radius(small_config):
    config = RunConfig.from_dict({**small_config, "r_max": 1.0e4})
    V = build_pipeline(config, {}, solve=False).potential
    targets = np.array(sorted(set(V.targets)))
    grid = np.linspace(1.0, 2.0, 17)
    controls = grid[np.min(np.abs(grid[:, None] - targets[None, :]), axis=1) >= 0.05]
    result = scan(V, TAU**2 + np.concatenate([targets, controls]) ** 2, r_max=1.0e4)
    assert np.median(result.powers(True)) <= -0.05
    assert abs(np.median(result.powers(False))) <= 0.01

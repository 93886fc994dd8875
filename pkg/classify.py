"""
Energy-scan diagnostics: growth exponents of the modified Pruefer amplitude of the regular solution,
resonance flags and a spectral-type summary.

Classes are candidates only. With R ~ r^p: p < -1/2 means u is square integrable (eigenvalue
candidate), -1/2 <= p < -tol decaying but not L2 (singular continuous candidate), |p| <= tol bounded
(ac type) and p > tol growing (the regular solution is not the subordinate one).
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from schrodinger import pruefer_trace, regular_pruefer_seed
from utils import write_csv

logger = logging.getLogger(__name__)

MIN_SCAN_RADIUS = 1.0e3
FIT_SAMPLES = 200
EIGENVALUE_CANDIDATE = "eigenvalue_candidate"
SC_CANDIDATE = "sc_candidate"
AC_TYPE = "ac_type"
GROWING = "growing"
CLASSES = (EIGENVALUE_CANDIDATE, SC_CANDIDATE, AC_TYPE, GROWING)


@dataclass(frozen=True)
class ScanRecord:
    lam: float
    k_bar: float
    gamma: float
    osc: float
    targeted: bool
    cls: str

    @property
    def power(self) -> float:
        """Fitted power of R (half the logR2 slope)."""
        return self.gamma / 2.0

    @property
    def bounded(self) -> bool:
        return self.cls == AC_TYPE


@dataclass
class ScanResult:
    records: List[ScanRecord]
    r_max: float
    tol: float

    def of_class(self, cls: str) -> List[ScanRecord]:
        return [rec for rec in self.records if rec.cls == cls]

    def powers(self, targeted: Optional[bool] = None) -> np.ndarray:
        return np.array([rec.power for rec in self.records if targeted is None or rec.targeted == targeted])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "lambda": [rec.lam for rec in self.records],
            "kbar": [rec.k_bar for rec in self.records],
            "gamma": [rec.gamma for rec in self.records],
            "osc": [rec.osc for rec in self.records],
            "targeted": [int(rec.targeted) for rec in self.records],
            "class": [rec.cls for rec in self.records],
        })

    def export(self, path: str, config_hash: Optional[str] = None) -> None:
        write_csv(path, self.to_frame().to_dict(orient="list"), config_hash)


def classify_power(power: float, tol: float) -> str:
    if power < -0.5:
        return EIGENVALUE_CANDIDATE
    if power < -tol:
        return SC_CANDIDATE
    if power <= tol:
        return AC_TYPE
    return GROWING


def fit_exponent(r: np.ndarray, logR2: np.ndarray):
    """Least-squares slope of logR2 against log r, and the spread of the residual."""
    x = np.log(r)
    slope, intercept = np.polyfit(x, logR2, 1)
    residual = logR2 - (slope * x + intercept)
    return float(slope), float(residual.max() - residual.min())


def scan(V, energies, r_max: float = 1.0e4, targets: Optional[Sequence[float]] = None, resolution: float = 0.01,
         tol: float = 0.02) -> ScanResult:
    """
    Fit the growth exponent of R at every energy lambda > tau^2.

    Args:
        V: potential with a Bessel core
        energies: spectral parameters above the band bottom
        r_max: end of the Pruefer run; the fit uses the last two decades
        targets: resonant momenta (defaults to V.targets)
        resolution: momentum distance within which an energy counts as targeted
        tol: half-width of the bounded band of R-powers

    Returns:
        ScanResult
    """
    lams = np.atleast_1d(np.asarray(energies, dtype=float))
    tau2 = V.tau**2
    if np.any(lams <= tau2):
        raise ValueError(f"Scan energies must lie above tau^2={tau2:g}")
    if r_max < MIN_SCAN_RADIUS:
        raise ValueError(f"Scan needs r_max >= {MIN_SCAN_RADIUS:g}, got {r_max:g}")
    if r_max > V.r_max:
        raise ValueError(f"Potential is only defined up to r={V.r_max:g}")
    targets = np.asarray(V.targets if targets is None else targets, dtype=float)

    k_bars = np.sqrt(lams - tau2)
    samples = np.geomspace(r_max / 100.0, r_max, FIT_SAMPLES)
    logR2_0, theta_0 = regular_pruefer_seed(V, k_bars)
    logger.info(f"Scanning {lams.size} energies to r={r_max:g}")
    trace = pruefer_trace(V, k_bars, 1.0, r_max, logR2_0, theta_0, samples)

    records = []
    for i, (lam, k_bar) in enumerate(zip(lams, k_bars)):
        gamma, osc = fit_exponent(samples, trace.logR2[i])
        targeted = bool(targets.size and np.min(np.abs(targets - k_bar)) <= resolution)
        records.append(ScanRecord(float(lam), float(k_bar), gamma, osc, targeted, classify_power(gamma / 2.0, tol)))
        logger.debug(f"lambda={lam:.6g}: R-power {gamma / 2.0:+.4f}, osc {osc:.3g}, targeted={targeted}")
    return ScanResult(records, float(r_max), tol)


def _match_eigenvalue(record: ScanRecord, measure, window: float) -> Dict[str, Any]:
    entry: Dict[str, Any] = {"lambda": record.lam, "power": record.power}
    if measure is None:
        return entry
    if measure.eigenvalues.size:
        nearest = int(np.argmin(np.abs(measure.eigenvalues - record.lam)))
        distance = float(abs(measure.eigenvalues[nearest] - record.lam))
        entry.update(nearest_eigenvalue=float(measure.eigenvalues[nearest]), jump=float(measure.jumps[nearest]),
                     matched=distance <= window)
    else:
        cell = int(np.clip(np.searchsorted(measure.edges, record.lam) - 1, 0, len(measure.drho) - 1))
        entry.update(cell=cell, drho=float(measure.drho[cell]))
    return entry


def _anomalous_cells(measure, record: ScanRecord) -> bool:
    if measure is None or measure.y_trend is None:
        return False
    cell = int(np.clip(np.searchsorted(measure.edges, record.lam) - 1, 0, len(measure.drho) - 1))
    return bool(abs(measure.y_trend[cell]) > 0.1 * max(abs(measure.drho[cell]), 1e-12))


def report(result: ScanResult, measure=None, resolution: float = 0.01) -> Dict[str, Any]:
    """JSON-ready summary: counts per class and cross-references of the decaying candidates against the measure."""
    counts = {cls: len(result.of_class(cls)) for cls in CLASSES}
    eigen = []
    for record in result.of_class(EIGENVALUE_CANDIDATE):
        window = 2.0 * record.k_bar * resolution
        if measure is not None:
            window = max(window, float(np.max(measure.widths)))
        eigen.append(_match_eigenvalue(record, measure, window))
    sc = [{"lambda": rec.lam, "power": rec.power, "anomalous_cell": _anomalous_cells(measure, rec)}
          for rec in result.of_class(SC_CANDIDATE)]
    targeted, control = result.powers(True), result.powers(False)
    summary = {
        "r_max": result.r_max,
        "tol": result.tol,
        "energies": len(result.records),
        "counts": counts,
        "median_power_targeted": float(np.median(targeted)) if targeted.size else None,
        "median_power_control": float(np.median(control)) if control.size else None,
        "eigenvalue_candidates": eigen,
        "sc_candidates": sc,
    }
    logger.info(f"Scan summary: {counts}")
    return summary

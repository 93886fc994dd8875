import argparse
import logging
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from bessel import bessel_zeros, oracle_report
from config import RunConfig
from classify import EIGENVALUE_CANDIDATE, report, scan
from metric import ManifoldParams, build_profile, export_profile, tilde_potential
from resonant_potential import (EnvelopeViolation, Potential, PotentialSpec, build_potential, dyadic_schedule,
                                embedded_eigenvalue_potential, free_potential, verify_contract, wigner_von_neumann,
                                write_potential)
from riccati import (BridgeBracketError, SolveConfig, comparison_check, coordinate_mismatch, curvature_bound,
                     export_trajectory, reconstruction_residual, solve_f, solve_t, verify_bounds, verify_t_bound)
from schrodinger import regular_solution, regular_solution_grid
from utils import make_envelope, parse_grid, write_json
from weyl import (bump, export_m_functions, m_function, m_minus_closed, m_plus_many, parseval, spectral_matrix,
                  stieltjes_measure, truncated_spectral_function, weyl_disk_integrals)

logger = logging.getLogger(__name__)

MAX_DELTA_HALVINGS = 4
PROFILE_EXPORT_LIMIT = 300.0
TRUNCATION_RADIUS = 200.0
RESONANCE_RADIUS = 1.0e4
RESONANCE_CONTROL_TOL = 0.01
M_FUNCTION_HEIGHT = 0.5
# (c, k_bar0) pairs with c/(4 k_bar0) >= 1/2; the Pruefer phase locks like r^(-c/(2 k_bar0))
WVN_CALIBRATION = ((2.0, 1.0), (3.0, 1.5), (4.0, 1.0), (4.0, 2.0))


class StageError(RuntimeError):
    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


@dataclass
class Pipeline:
    config: RunConfig
    params: ManifoldParams
    h: Callable
    spec: PotentialSpec
    potential: Potential
    trajectory: Any = None
    profile: Any = None

    @property
    def nu(self) -> float:
        return self.params.mode[2]


def run_stage(report_data: Dict[str, Any], stage: str, func: Callable, *args, **kwargs):
    """Run one pipeline stage; failures are logged and recorded in the report."""
    try:
        return func(*args, **kwargs)
    except Exception as e:
        raise _fail(report_data, stage, e) from e


def _fail(report_data: Dict[str, Any], stage: str, error: Exception) -> StageError:
    logger.error(f"Stage '{stage}' failed: {error}")
    report_data.setdefault("errors", []).append({"stage": stage, "error": str(error)})
    return StageError(stage, error)


def _solve_config(config: RunConfig) -> SolveConfig:
    solver = config.solver
    return SolveConfig(rel_tol=float(solver.get("rtol", 1e-10)), abs_tol=float(solver.get("atol", 1e-12)),
                       max_step=float(solver.get("max_step", 0.1)), r_end=config.r_max)


def make_spec(config: RunConfig, params: ManifoldParams, h: Callable) -> PotentialSpec:
    sched = config.schedule
    width = float(sched.get("width", 0.5))
    pieces = dyadic_schedule(
        h,
        start=params.b + params.delta + width,
        r_max=config.r_max,
        k_bar_min=float(sched.get("k_bar_min", 1.0)),
        k_bar_max=float(sched.get("k_bar_max", 2.0)),
        max_level=int(sched.get("max_level", 1)),
        growth=float(sched.get("growth", 2.0)),
        width=width,
        amplitudes=sched.get("amplitudes"),
        random_phases=bool(sched.get("random_phases", False)),
        seed=config.seed,
    )
    return PotentialSpec(
        tau=params.tau,
        nu=params.mode[2],
        h=h,
        b=params.b,
        delta=params.delta,
        schedule=pieces,
        width=width,
        seed=config.seed,
        mode=sched.get("mode", "locked"),
        r_max=config.r_max,
        max_step=float(config.solver.get("max_step", 0.1)),
        envelope=config.envelope,
    )


def build_pipeline(config: RunConfig, report_data: Dict[str, Any], solve: bool = True) -> Pipeline:
    """
    Assemble manifold parameters, potential and (optionally) the metric perturbation.

    delta is halved (at most MAX_DELTA_HALVINGS times) when f leaves (1/2, 2) on the bridge.
    """
    h = make_envelope(config.envelope)
    params = run_stage(report_data, "metric", ManifoldParams, config.n, config.K0, h, config.b, config.delta,
                       None if config.mode == "auto" else int(config.mode))
    for attempt in range(MAX_DELTA_HALVINGS + 1):
        spec = run_stage(report_data, "potential", make_spec, config, params, h)
        potential = run_stage(report_data, "potential", build_potential, tilde_potential(params), spec)
        pipeline = Pipeline(config, params, h, spec, potential)
        if not solve:
            return pipeline
        try:
            pipeline.trajectory = solve_f(potential, params, _solve_config(config))
        except BridgeBracketError as e:
            if attempt == MAX_DELTA_HALVINGS:
                raise _fail(report_data, "riccati", e) from e
            logger.warning(f"{e}; halving delta to {params.delta / 2:g}")
            params = params.with_delta(params.delta / 2.0)
            continue
        except Exception as e:
            raise _fail(report_data, "riccati", e) from e
        pipeline.profile = run_stage(report_data, "metric", build_profile, params, pipeline.trajectory)
        report_data["delta_used"] = params.delta
        return pipeline


def _ensure_out(out: str) -> str:
    os.makedirs(out, exist_ok=True)
    return out


def _energy_grid(grid: Optional[str], lo: float, hi: float, count: int) -> np.ndarray:
    if grid:
        lo, hi, count = parse_grid(grid)
    return np.linspace(lo, hi, count)


def cmd_build(config: RunConfig, out: str) -> Dict[str, Any]:
    """Profile, potential and trajectory CSVs plus the build report."""
    digest = config.config_hash()
    out = _ensure_out(out)
    report_data: Dict[str, Any] = {"command": "build", "config": config.to_dict()}
    try:
        pipe = build_pipeline(config, report_data)
        params, b, delta = pipe.params, pipe.params.b, pipe.params.delta
        r_profile = np.linspace(0.01, min(PROFILE_EXPORT_LIMIT, config.r_max), 29900)
        r_tail = np.union1d(np.linspace(0.01, 2.0 * b, 2000), np.geomspace(2.0 * b, config.r_max, 20000))
        run_stage(report_data, "export", export_profile, pipe.profile, os.path.join(out, "profile.csv"),
                  r_profile, digest)
        run_stage(report_data, "export", write_potential, pipe.potential, os.path.join(out, "potential.csv"),
                  r_tail, digest)
        run_stage(report_data, "export", export_trajectory, pipe.trajectory, os.path.join(out, "trajectory.csv"),
                  r_tail[r_tail >= b - delta], digest)

        contracts = run_stage(report_data, "contracts", verify_contract, pipe.potential, tilde_potential(params),
                              pipe.spec)
        report_data["contracts"] = contracts.to_dict()
        report_data["certificate"] = pipe.potential.certificate
        report_data["curvature"] = run_stage(report_data, "metric", curvature_bound, pipe.profile, pipe.h,
                                             b + delta, config.r_max)
        report_data["reconstruction_residual"] = run_stage(report_data, "metric", reconstruction_residual,
                                                           pipe.profile, pipe.potential, b - delta, config.r_max)
        report_data["riccati_bounds"] = run_stage(report_data, "riccati", verify_bounds, pipe.trajectory,
                                                  pipe.h).to_dict()
        report_data["passed"] = contracts.passed and report_data["reconstruction_residual"] <= 1e-6
    except StageError:
        report_data["passed"] = False
    write_json(os.path.join(out, "build_report.json"), report_data, digest)
    return report_data


def _band_bottom(measure, tau2: float) -> Dict[str, Any]:
    below = measure.eigenvalues[measure.eigenvalues < tau2]
    band = (measure.edges[:-1] >= tau2) & (measure.edges[1:] <= tau2 + 4.0)
    return {
        "eigenvalues_below": below.tolist(),
        "band_cells": int(band.sum()),
        "positive_band_cells": int((measure.drho[band] > 0).sum()),
    }


def cmd_spectrum(config: RunConfig, out: str, grid: Optional[str] = None) -> Dict[str, Any]:
    """Truncated spectral function on the cell grid and M-function samples above it."""
    digest = config.config_hash()
    out = _ensure_out(out)
    report_data: Dict[str, Any] = {"command": "spectrum", "config": config.to_dict()}
    try:
        pipe = build_pipeline(config, report_data, solve=False)
        tau2 = pipe.params.tau**2
        lo, hi, cells = parse_grid(grid) if grid else (0.5 * tau2, tau2 + 4.0, 400)
        edges = np.linspace(lo, hi, cells + 1)
        measure = run_stage(report_data, "spectrum", truncated_spectral_function, pipe.potential,
                            TRUNCATION_RADIUS, edges=edges)
        run_stage(report_data, "export", measure.export, os.path.join(out, "measure.csv"), digest)

        mids = measure.midpoints[:: max(1, len(measure.midpoints) // 20)]
        samples = [run_stage(report_data, "weyl", m_function, pipe.potential,
                             complex(lam, M_FUNCTION_HEIGHT)) for lam in mids]
        run_stage(report_data, "export", export_m_functions, samples, os.path.join(out, "m_function.csv"), digest)
        report_data["eigenvalues"] = measure.eigenvalues.size
        report_data["band_bottom"] = _band_bottom(measure, tau2)
        report_data["passed"] = True
    except StageError:
        report_data["passed"] = False
    write_json(os.path.join(out, "spectrum_report.json"), report_data, digest)
    return report_data


def cmd_scan(config: RunConfig, out: str, grid: Optional[str] = None) -> Dict[str, Any]:
    """Pruefer exponent scan over an energy grid, with the classification report."""
    digest = config.config_hash()
    out = _ensure_out(out)
    report_data: Dict[str, Any] = {"command": "scan", "config": config.to_dict()}
    try:
        pipe = build_pipeline(config, report_data, solve=False)
        tau2 = pipe.params.tau**2
        k_lo, k_hi = float(config.schedule.get("k_bar_min", 1.0)), float(config.schedule.get("k_bar_max", 2.0))
        energies = _energy_grid(grid, tau2 + k_lo**2, tau2 + k_hi**2, 41)
        result = run_stage(report_data, "scan", scan, pipe.potential, energies, config.r_max)
        run_stage(report_data, "export", result.export, os.path.join(out, "scan.csv"), digest)

        measure = None
        candidates = [rec.lam for rec in result.of_class(EIGENVALUE_CANDIDATE)]
        if candidates:
            edges = np.linspace(min(candidates) - 0.05, max(candidates) + 0.05, 41)
            measure = run_stage(report_data, "spectrum", truncated_spectral_function, pipe.potential,
                                TRUNCATION_RADIUS, edges=edges)
        report_data["summary"] = report(result, measure)
        report_data["passed"] = True
    except StageError:
        report_data["passed"] = False
    write_json(os.path.join(out, "scan_report.json"), report_data, digest)
    return report_data


def _check(checks: List[Dict[str, Any]], name: str, passed: bool, **details) -> None:
    checks.append({"name": name, "passed": bool(passed), **details})
    (logger.info if passed else logger.warning)(f"Check {name}: {'pass' if passed else 'FAIL'}")


def _skip(checks: List[Dict[str, Any]], name: str, reason: str) -> None:
    checks.append({"name": name, "passed": True, "skipped": reason})
    logger.info(f"Check {name}: skipped ({reason})")


def _off_zeros(nu: float, lams: np.ndarray, margin: float) -> np.ndarray:
    zeros = np.array(bessel_zeros(nu, int(np.sqrt(lams.max()) / np.pi) + 3)) ** 2
    return lams[np.min(np.abs(lams[:, None] - zeros[None, :]), axis=1) >= margin]


def _m_minus_routes(pipe: Pipeline, seed: int, count: int = 100) -> float:
    rng = np.random.Generator(np.random.Philox(seed))
    lams = _off_zeros(pipe.nu, rng.uniform(0.05, 50.0, 4 * count), 0.5)[:count]
    worst = 0.0
    for lam in lams:
        sample = regular_solution(pipe.potential, lam, [1.0])
        ode = sample.u_prime[0] / sample.u[0]
        closed = m_minus_closed(lam, pipe.nu)
        worst = max(worst, abs(ode - closed.real) / abs(closed), abs(closed.imag))
    return worst


def _herglotz(pipe: Pipeline) -> bool:
    tau2 = pipe.params.tau**2
    zs = tau2 + np.array([0.5 + 0.1j, 1.5 + 0.1j, 3.0 + 0.05j, -0.5 + 0.2j])
    matrix = spectral_matrix(m_minus_closed(zs, pipe.nu), m_plus_many(pipe.potential, zs), zs)
    return matrix.is_herglotz()


def _free_m_plus(pipe: Pipeline) -> float:
    tau = pipe.params.tau
    zs = np.array([1.5 + 0.5j, 3.0 + 0.1j, 0.2 + 1.0j])
    values = m_plus_many(free_potential(pipe.nu, tau), zs, R=200.0)
    return float(np.max(np.abs(values - 1j * np.sqrt(zs - tau**2))))


def _weyl_disk(pipe: Pipeline) -> float:
    """Worst relative error of both Weyl identities at 10 energies and y in {1e-1, 1e-2}."""
    tau2 = pipe.params.tau**2
    lams = _off_zeros(pipe.nu, np.linspace(tau2 + 0.3, tau2 + 9.3, 31), 0.5)[::3][:10]
    worst = 0.0
    for y in (1e-1, 1e-2):
        for lam in lams:
            sample = weyl_disk_integrals(pipe.potential, complex(lam, y))
            worst = max(worst, abs(sample.left - sample.left_expected) / abs(sample.left_expected),
                        abs(sample.right - sample.right_expected) / abs(sample.right_expected))
    return worst


def _measure_relations(pipe: Pipeline) -> Dict[str, Any]:
    tau2 = pipe.params.tau**2
    # stay below the first resonant momentum
    top = min(1.1, 0.9 * min(pipe.potential.targets, default=2.0) ** 2)
    edges = np.linspace(tau2 + 0.1, tau2 + top, 51)
    grid = stieltjes_measure(pipe.potential, edges)
    m = m_minus_closed(grid.midpoints, pipe.nu).real
    keep = _off_zeros(pipe.nu, grid.midpoints, 0.05)
    mask = np.isin(grid.midpoints, keep)
    gap12 = np.abs(grid.drho12 / grid.drho11 - m)[mask]
    gap22 = np.abs(grid.drho22 / grid.drho11 - m**2)[mask]
    passed = bool(np.all(gap12 <= 2e-2 * np.abs(m[mask]) + 1e-3) and np.all(gap22 <= 2e-2 * m[mask] ** 2 + 1e-3))
    return {"passed": passed, "max_gap_12": float(gap12.max()), "max_gap_22": float(gap22.max()),
            "cells": int(mask.sum())}


def _norming_constant(pipe: Pipeline, k_bar0: float = 1.0, c: float = 6.0) -> Dict[str, Any]:
    """Jump of the truncated measure at an embedded eigenvalue against 1/||u||^2, for L and 2L."""
    tau = pipe.params.tau
    lam0 = tau * tau + k_bar0 * k_bar0
    V = embedded_eigenvalue_potential(pipe.nu, tau, k_bar0=k_bar0, c=c, r_max=400.0)
    _, _, norm = regular_solution_grid(V, [lam0], [400.0], with_norm=True)
    expected = 1.0 / norm[0, 0]
    jumps = []
    for L in (150.0, 300.0):
        grid = truncated_spectral_function(V, L=L, edges=np.linspace(lam0 - 0.1, lam0 + 0.1, 21))
        jumps.append(float(grid.jumps[int(np.argmin(np.abs(grid.eigenvalues - lam0)))]))
    errors = [abs(j - expected) / expected for j in jumps]
    return {"passed": max(errors) <= 2e-2, "expected": expected, "jumps": jumps, "relative_errors": errors}


def _parseval(pipe: Pipeline) -> Dict[str, Any]:
    """Parseval for five bumps on a fine grid and on a grid four times coarser."""
    L = min(TRUNCATION_RADIUS, pipe.potential.r_max)
    lam_max = pipe.params.tau**2 + 30.0
    fine = truncated_spectral_function(pipe.potential, L=L, lambda_min=0.02, lambda_max=lam_max, cells=1200)
    coarse = fine.coarsen(4)
    shapes = [(5.0, 2.0), (8.0, 3.0), (12.0, 4.0), (6.0, 1.5), (10.0, 2.5)]
    errors = {"fine": [], "coarse": []}
    for center, radius in shapes:
        f = bump(center, radius)
        for name, measure in (("fine", fine), ("coarse", coarse)):
            result = parseval(f, measure, pipe.potential, (center - radius, center + radius))
            errors[name].append(result["relative_error"])
    worst_fine, worst_coarse = max(errors["fine"]), max(errors["coarse"])
    passed = worst_fine <= 5e-2 and worst_fine <= worst_coarse + 1e-3
    return {"passed": passed, "fine": worst_fine, "coarse": worst_coarse}


def _wigner_von_neumann_calibration(pipe: Pipeline, r_max: float = 3000.0) -> Dict[str, Any]:
    """|R-power| = c/(4 k_bar0) at the resonance and ~0 away from it."""
    tau = pipe.params.tau
    rows = []
    for c, k_bar0 in WVN_CALIBRATION:
        V = wigner_von_neumann(c=c, k_bar0=k_bar0, tau=tau, nu=pipe.nu)
        result = scan(V, tau * tau + np.array([k_bar0, 1.5 * k_bar0]) ** 2, r_max=r_max)
        on, off = result.records
        expected = c / (4.0 * k_bar0)
        rows.append({"c": c, "k_bar0": k_bar0, "power": on.power, "expected": expected, "off_power": off.power,
                     "passed": abs(abs(on.power) - expected) <= 0.1 * expected and abs(off.power) <= result.tol})
    return {"passed": all(row["passed"] for row in rows), "cases": rows}


def _dyadic_resonance(pipe: Pipeline, r_max: float, margin: float = 0.05) -> Dict[str, Any]:
    """Median R-power over the schedule targets against off-target controls."""
    tau2 = pipe.params.tau**2
    targets = np.array(sorted(set(pipe.potential.targets)))
    sched = pipe.config.schedule
    grid = np.linspace(float(sched.get("k_bar_min", 1.0)), float(sched.get("k_bar_max", 2.0)), 17)
    controls = grid[np.min(np.abs(grid[:, None] - targets[None, :]), axis=1) >= margin]
    result = scan(pipe.potential, tau2 + np.concatenate([targets, controls]) ** 2, r_max=r_max)
    targeted = float(np.median(result.powers(True)))
    control = float(np.median(result.powers(False)))
    return {"passed": targeted <= -0.05 and abs(control) <= RESONANCE_CONTROL_TOL, "median_targeted": targeted,
            "median_control": control}


def _band_bottom_check(pipe: Pipeline) -> Dict[str, Any]:
    tau2 = pipe.params.tau**2
    L = min(TRUNCATION_RADIUS, pipe.potential.r_max)
    measure = truncated_spectral_function(pipe.potential, L, edges=np.linspace(0.5 * tau2, tau2 + 4.0, 401))
    summary = _band_bottom(measure, tau2)
    return {"passed": summary["band_cells"] > 0 and summary["positive_band_cells"] == summary["band_cells"],
            **summary}


def _comparison_suite(config: RunConfig, count: int = 100) -> int:
    rng = np.random.Generator(np.random.Philox(config.seed))
    failures = 0
    for _ in range(count):
        r0 = float(rng.uniform(3.0, 8.0))
        jump = float(rng.uniform(0.1, 2.0))
        base = float(rng.uniform(-0.5, 0.5))
        h2 = lambda r, base=base: base + 0.0 * np.asarray(r, dtype=float)
        h1 = lambda r, base=base, jump=jump, r0=r0: base + jump * (np.asarray(r, dtype=float) >= r0)
        if not comparison_check(h1, h2, r0, n=config.n, K0=config.K0).passed:
            failures += 1
    return failures


def _record(checks: List[Dict[str, Any]], name: str, result: Dict[str, Any]) -> None:
    details = {k: v for k, v in result.items() if k != "passed"}
    _check(checks, name, result["passed"], **details)


def cmd_verify(config: RunConfig, out: str) -> Dict[str, Any]:
    """Invariant suite over a full build; any failed check makes the run fail."""
    digest = config.config_hash()
    out = _ensure_out(out)
    report_data: Dict[str, Any] = {"command": "verify", "config": config.to_dict()}
    checks: List[Dict[str, Any]] = []
    try:
        pipe = build_pipeline(config, report_data)
        params, b, delta, h = pipe.params, pipe.params.b, pipe.params.delta, pipe.h

        oracle = run_stage(report_data, "bessel", oracle_report, (pipe.nu,), config.seed)
        _check(checks, "bessel oracle", oracle["closed_form_error"] <= 1e-10 and oracle["ode_residual"] <= 1e-7
               and oracle["seam_gap"] <= 1e-8 and oracle["interlacing"], **oracle)

        contracts = run_stage(report_data, "contracts", verify_contract, pipe.potential, tilde_potential(params),
                              pipe.spec)
        for name, result in contracts.contracts.items():
            _check(checks, f"contract {name}", result["passed"], margin=result["margin"])

        residual = run_stage(report_data, "metric", reconstruction_residual, pipe.profile, pipe.potential,
                             b - delta, config.r_max)
        _check(checks, "pipeline closure", residual <= 1e-6, residual=residual)
        curvature = run_stage(report_data, "metric", curvature_bound, pipe.profile, h, b + delta, config.r_max)
        _check(checks, "curvature bound", curvature["growth"] <= 0.05, **curvature)

        bounds = run_stage(report_data, "riccati", verify_bounds, pipe.trajectory, h)
        _check(checks, "riccati bounds", max(bounds.growth_f, bounds.growth_fprime) <= 0.05, **bounds.to_dict())
        cfg = _solve_config(config)
        t_traj = run_stage(report_data, "riccati", solve_t, pipe.potential, params, cfg)
        mismatch = coordinate_mismatch(pipe.trajectory, t_traj, cfg.rel_tol)
        _check(checks, "t substitution", mismatch["max_ratio"] <= 10.0, **mismatch)
        t_bound = verify_t_bound(t_traj, h)
        _check(checks, "t bound", t_bound["passed"] and t_bound["upper_passed"],
               **{k: v for k, v in t_bound.items() if k != "passed"})
        failures = run_stage(report_data, "riccati", _comparison_suite, config)
        _check(checks, "comparison", failures == 0, failures=failures)

        worst = run_stage(report_data, "weyl", _m_minus_routes, pipe, config.seed)
        _check(checks, "M_minus two routes", worst <= 1e-6, relative_error=worst)
        _check(checks, "Herglotz", run_stage(report_data, "weyl", _herglotz, pipe))
        free_error = run_stage(report_data, "weyl", _free_m_plus, pipe)
        _check(checks, "free M_plus", free_error <= 1e-8, error=free_error)
        disk = run_stage(report_data, "weyl", _weyl_disk, pipe)
        _check(checks, "Weyl disk identities", disk <= 1e-2, relative_error=disk)
        _record(checks, "measure relations", run_stage(report_data, "weyl", _measure_relations, pipe))
        _record(checks, "norming constant", run_stage(report_data, "weyl", _norming_constant, pipe))
        _record(checks, "Parseval", run_stage(report_data, "weyl", _parseval, pipe))
        _record(checks, "band bottom", run_stage(report_data, "spectrum", _band_bottom_check, pipe))

        _record(checks, "Wigner-von Neumann exponent",
                run_stage(report_data, "scan", _wigner_von_neumann_calibration, pipe))
        if config.r_max >= RESONANCE_RADIUS:
            _record(checks, "resonance signatures",
                    run_stage(report_data, "scan", _dyadic_resonance, pipe, RESONANCE_RADIUS))
        else:
            _skip(checks, "resonance signatures", f"needs r_max >= {RESONANCE_RADIUS:g}")
    except StageError as e:
        if isinstance(e.error, EnvelopeViolation):
            _check(checks, "contract II", False, error=str(e.error))
        else:
            _check(checks, e.stage, False, error=str(e.error))
    report_data["checks"] = checks
    report_data["passed"] = all(c["passed"] for c in checks)
    write_json(os.path.join(out, "verify_report.json"), report_data, digest)
    return report_data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Warped-product spectral toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build", "spectrum", "scan", "verify"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON run configuration")
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("--rmax", type=float, help="override r_max")
        cmd.add_argument("--seed", type=int, help="override the seed")
        if name in ("spectrum", "scan"):
            cmd.add_argument("--grid", help="energy grid lo:hi:n")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"seed": args.seed, "output_dir": args.out, "r_max": args.rmax}
        config = RunConfig.from_json(args.config, overrides)
    except Exception as e:
        logger.error(f"Invalid configuration: {e}")
        return 2
    out = config.output_dir
    if args.command == "build":
        result = cmd_build(config, out)
    elif args.command == "spectrum":
        result = cmd_spectrum(config, out, args.grid)
    elif args.command == "scan":
        result = cmd_scan(config, out, args.grid)
    else:
        result = cmd_verify(config, out)
    return 0 if result.get("passed") else 1


if __name__ == "__main__":
    sys.exit(main())

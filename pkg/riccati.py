"""
Metric equation for the perturbation f of the warp profile beyond b - delta:

    tau^2 + (n-1)^2/2 sqrt|K0| f + (n-1)^2/4 f^2 + (n-1)/2 f' + lambda_i / f1^2 = V(r),
    (log f1)' = sqrt|K0| + f.

The angular term lambda_i/f1^2 is localized by co-evolving ell = log f1, so w = lambda_i e^{-2 ell}
stays well defined for lambda_i = 0. solve_t integrates the same equation in the coordinate
t = f e^{kappa r}, kappa = (n-1) sqrt|K0|, on windows short enough to keep e^{kappa r} bounded.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from config import R_MAX, SOLVER_ATOL, SOLVER_RTOL
from metric import ManifoldParams, WarpProfile, choose_nu, effective_potential, radial_curvature
from schrodinger import StepSizeError
from utils import write_csv

logger = logging.getLogger(__name__)

_BRACKET = (0.5, 2.0)


class BridgeBracketError(RuntimeError):
    """Raised when f leaves (1/2, 2) on the bridge [b - delta, b + delta]."""

    def __init__(self, message: str, r: float):
        super().__init__(message)
        self.r = r


@dataclass(frozen=True)
class SolveConfig:
    rel_tol: float = SOLVER_RTOL
    abs_tol: float = SOLVER_ATOL
    max_step: float = 0.1
    r_end: float = R_MAX
    dense_output: bool = True
    window: float = 30.0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("Solver tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")
        if not 0 < self.window <= 30.0:
            raise ValueError("window must keep kappa * length within (0, 30]")


@dataclass(frozen=True)
class RiccatiState:
    r: float
    f: float
    w: float
    t: Optional[float] = None


@dataclass
class BoundsReport:
    C_f: float
    C_fprime: float
    C_f_half: float
    C_fprime_half: float

    @property
    def growth_f(self) -> float:
        return self.C_f / self.C_f_half - 1.0 if self.C_f_half > 0 else 0.0

    @property
    def growth_fprime(self) -> float:
        return self.C_fprime / self.C_fprime_half - 1.0 if self.C_fprime_half > 0 else 0.0

    def to_dict(self) -> Dict[str, float]:
        return {"C_f": self.C_f, "C_fprime": self.C_fprime, "C_f_half": self.C_f_half,
                "C_fprime_half": self.C_fprime_half, "growth_f": self.growth_f,
                "growth_fprime": self.growth_fprime}


@dataclass
class ComparisonResult:
    passed: bool
    min_gap: float
    r_min_gap: float


class RiccatiTrajectory:
    """
    Dense solution of (f, ell) on [r_start, r_end].

    Segments are (lo, hi, dense_solution, anchor). With anchor None the first component is f itself,
    otherwise it is T = f e^{kappa (r - anchor)}.
    """

    def __init__(self, params: ManifoldParams, potential, segments: List[Tuple], angular: bool = True):
        self.params = params
        self.potential = potential
        self.segments = segments
        self.angular = angular
        self.r_start = segments[0][0]
        self.r_end = segments[-1][1]
        self.kappa = (params.n - 1) * params.sqrt_k
        self.lambda_i = params.mode[1] if angular else 0.0
        self._his = np.array([seg[1] for seg in segments])

    def _raw(self, r: np.ndarray):
        f = np.empty_like(r)
        ell = np.empty_like(r)
        which = np.minimum(np.searchsorted(self._his, r, side="left"), len(self.segments) - 1)
        for i, (lo, hi, sol, anchor) in enumerate(self.segments):
            mask = which == i
            if not np.any(mask):
                continue
            y = sol(r[mask])
            f[mask] = y[0] if anchor is None else y[0] * np.exp(-self.kappa * (r[mask] - anchor))
            ell[mask] = y[1]
        return f, ell

    def evaluate(self, r):
        """(f, f', ell) at r; f' comes from the equation, not from differencing."""
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(arr < self.r_start - 1e-12) or np.any(arr > self.r_end + 1e-12):
            raise ValueError(f"Trajectory covers [{self.r_start:g}, {self.r_end:g}] only")
        f, ell = self._raw(arr)
        return f, self._f_prime(arr, f, ell), ell

    def _f_prime(self, r, f, ell):
        n, sk = self.params.n, self.params.sqrt_k
        w = self.lambda_i * np.exp(-2.0 * ell)
        v = np.asarray(self.potential(r), dtype=float)
        return 2.0 / (n - 1) * (v - self.params.tau**2 - (n - 1) ** 2 / 2.0 * sk * f - (n - 1) ** 2 / 4.0 * f**2 - w)

    def f(self, r):
        return self.evaluate(r)[0]

    def f_prime(self, r):
        return self.evaluate(r)[1]

    def w(self, r):
        return self.lambda_i * np.exp(-2.0 * self.evaluate(r)[2])

    def state(self, r: float) -> RiccatiState:
        f, _, ell = self.evaluate(r)
        log_t = math.log(abs(f[0])) + self.kappa * r if f[0] != 0 else -math.inf
        t = math.copysign(math.exp(log_t), f[0]) if log_t < 700 else None
        return RiccatiState(float(r), float(f[0]), float(self.lambda_i * math.exp(-2.0 * ell[0])), t)


def _check_tau(V, params: ManifoldParams) -> None:
    if abs(V.tau - params.tau) > 1e-12:
        raise ValueError(f"Potential tau={V.tau} does not match (n-1)sqrt|K0|/2={params.tau}")


def _check_bridge(trajectory: RiccatiTrajectory) -> None:
    params = trajectory.params
    r = np.linspace(params.b - params.delta, min(params.b + params.delta, trajectory.r_end), 401)
    f = trajectory.f(r)
    outside = (f <= _BRACKET[0]) | (f >= _BRACKET[1])
    if np.any(outside):
        exit_r = float(r[np.argmax(outside)])
        raise BridgeBracketError(
            f"f={f[np.argmax(outside)]:.4g} left (1/2, 2) on the bridge at r={exit_r:.6g}; "
            f"delta={params.delta} is too large",
            exit_r,
        )


def solve_f(V, params: ManifoldParams, cfg: SolveConfig = SolveConfig(), f_start: float = 1.0,
            angular: bool = True, check_bridge: bool = True) -> RiccatiTrajectory:
    """
    Solve the metric equation for f on [b - delta, cfg.r_end].

    Args:
        V: potential with the same tau as params
        params: manifold parameters
        cfg: solver configuration
        f_start: f(b - delta), 1 for the metric construction
        angular: include the lambda_i / f1^2 term
        check_bridge: enforce 1/2 < f < 2 on the bridge

    Returns:
        RiccatiTrajectory
    """
    _check_tau(V, params)
    n, sk, tau2 = params.n, params.sqrt_k, params.tau**2
    lam = params.mode[1] if angular else 0.0
    c1, c2, c3 = 2.0 / (n - 1), (n - 1) ** 2 / 2.0 * sk, (n - 1) ** 2 / 4.0
    r0 = params.b - params.delta

    def rhs(r, y):
        f, ell = y
        w = lam * math.exp(-2.0 * ell)
        return [c1 * (V.at(r) - tau2 - c2 * f - c3 * f * f - w), sk + f]

    y0 = [f_start, (sk + 1.0) * (r0 - 2.0)]
    sol = solve_ivp(rhs, (r0, cfg.r_end), y0, method="RK45", rtol=cfg.rel_tol, atol=cfg.abs_tol,
                    max_step=cfg.max_step, dense_output=True)
    if sol.status != 0:
        raise StepSizeError(f"solve_f stopped at r={sol.t[-1]:.6g}: {sol.message}")
    trajectory = RiccatiTrajectory(params, V, [(r0, cfg.r_end, sol.sol, None)], angular)
    if check_bridge:
        _check_bridge(trajectory)
    logger.info(f"Solved f on [{r0:g}, {cfg.r_end:g}] in {sol.t.size} steps, f(r_end)={sol.y[0, -1]:.3e}")
    return trajectory


def solve_t(V, params: ManifoldParams, cfg: SolveConfig = SolveConfig(), f_start: float = 1.0,
            angular: bool = True) -> RiccatiTrajectory:
    """
    Same equation in t = f e^{kappa r}:

        t' + (n-1)/2 t^2 e^{-kappa r} + 2/(n-1) w e^{kappa r} = 2/(n-1) (V - tau^2) e^{kappa r}.

    Each window [r_k, r_k + window/kappa] evolves T = t e^{-kappa r_k}; T is rescaled analytically
    at the window boundary.
    """
    _check_tau(V, params)
    n, sk, tau2 = params.n, params.sqrt_k, params.tau**2
    kappa = (n - 1) * sk
    lam = params.mode[1] if angular else 0.0
    c1, half = 2.0 / (n - 1), (n - 1) / 2.0
    span = cfg.window / kappa
    anchor = params.b - params.delta
    y = [f_start, (sk + 1.0) * (anchor - 2.0)]
    segments = []
    while anchor < cfg.r_end:
        hi = min(anchor + span, cfg.r_end)

        def rhs(r, state, anchor=anchor):
            T, ell = state
            grow = math.exp(kappa * (r - anchor))
            w = lam * math.exp(-2.0 * ell)
            return [c1 * (V.at(r) - tau2 - w) * grow - half * T * T / grow, sk + T / grow]

        sol = solve_ivp(rhs, (anchor, hi), y, method="RK45", rtol=cfg.rel_tol, atol=cfg.abs_tol,
                        max_step=cfg.max_step, dense_output=True)
        if sol.status != 0:
            raise StepSizeError(f"solve_t stopped at r={sol.t[-1]:.6g}: {sol.message}")
        segments.append((anchor, hi, sol.sol, anchor))
        T_end, ell_end = sol.y[:, -1]
        y = [T_end * math.exp(-kappa * (hi - anchor)), ell_end]
        anchor = hi
    logger.info(f"Solved t on {len(segments)} windows up to r={cfg.r_end:g}")
    return RiccatiTrajectory(params, V, segments, angular)


def coordinate_mismatch(f_traj: RiccatiTrajectory, t_traj: RiccatiTrajectory, rel_tol: float,
                        count: int = 4000) -> Dict[str, float]:
    """max |t e^{-kappa r} - f| / (rel_tol (1 + |f|)) over the common domain."""
    r = np.linspace(max(f_traj.r_start, t_traj.r_start), min(f_traj.r_end, t_traj.r_end), count)
    f, g = f_traj.f(r), t_traj.f(r)
    ratio = np.abs(g - f) / (rel_tol * (1.0 + np.abs(f)))
    return {"max_ratio": float(ratio.max()), "worst_r": float(r[np.argmax(ratio)])}


def _sample_grid(lo: float, hi: float) -> np.ndarray:
    return np.union1d(np.geomspace(lo, hi, 2000), np.linspace(lo, hi, 20000))


def verify_bounds(trajectory: RiccatiTrajectory, h: Callable, r_from: Optional[float] = None) -> BoundsReport:
    """C_f = max |f|(1+r)/h and C_f' = max |f'|(1+r)/h over [b+delta, r_end], and over the first half range."""
    params = trajectory.params
    lo = params.b + params.delta if r_from is None else r_from
    r = _sample_grid(lo, trajectory.r_end)
    f, fp, _ = trajectory.evaluate(r)
    scale = (1.0 + r) / h(r)
    cf, cfp = np.abs(f) * scale, np.abs(fp) * scale
    half = r <= trajectory.r_end / 2.0
    report = BoundsReport(float(cf.max()), float(cfp.max()), float(cf[half].max()), float(cfp[half].max()))
    logger.info(f"Riccati bounds: C_f={report.C_f:.4g}, C_f'={report.C_fprime:.4g}")
    return report


def verify_t_bound(trajectory: RiccatiTrajectory, h: Callable, r0: Optional[float] = None,
                   factor: float = 10.0, upper_factor: float = 6.0) -> Dict[str, Any]:
    """
    Check |t(r)| <= |t(r0)| + factor h(r) e^{kappa r}/(1+r) and the one-sided t(r) <= |t(r0)| + upper_factor
    h(r) e^{kappa r}/(1+r), both divided through by e^{kappa r}.
    """
    params = trajectory.params
    r0 = params.b + params.delta if r0 is None else r0
    r = _sample_grid(r0, trajectory.r_end)
    f = trajectory.f(r)
    f0 = abs(float(trajectory.f(r0)[0]))
    carried = f0 * np.exp(-trajectory.kappa * (r - r0))
    envelope = h(r) / (1.0 + r)
    two_sided = np.abs(f) / (carried + factor * envelope)
    upper = np.maximum(f, 0.0) / (carried + upper_factor * envelope)
    return {
        "r0": r0,
        "passed": bool(two_sided.max() <= 1.0),
        "max_ratio": float(two_sided.max()),
        "upper_passed": bool(upper.max() <= 1.0),
        "upper_max_ratio": float(upper.max()),
    }


def curvature_bound(profile: WarpProfile, h: Callable, r_start: float, r_end: float) -> Dict[str, float]:
    """C = max |K_rad - K0|(1+r)/h(r) over [r_start, r_end] and its growth over the half range."""
    r = _sample_grid(r_start, r_end)
    ratio = np.abs(radial_curvature(profile, r) - profile.params.K0) * (1.0 + r) / h(r)
    half = r <= r_end / 2.0
    C, C_half = float(ratio.max()), float(ratio[half].max())
    growth = C / C_half - 1.0 if C_half > 0 else 0.0
    logger.info(f"Curvature bound C={C:.4g} (growth {growth:.2%} over the last doubling)")
    return {"C": C, "C_half": C_half, "growth": growth}


def reconstruction_residual(profile: WarpProfile, V, r_start: float, r_end: float, count: int = 20000) -> float:
    """Max relative difference between the profile's effective potential and V on [r_start, r_end]."""
    r = np.linspace(r_start, r_end, count)
    v = np.asarray(V(r), dtype=float)
    rebuilt = effective_potential(profile, profile.params.mode[1], r)
    return float(np.max(np.abs(rebuilt - v) / np.maximum(np.abs(v), 1e-300)))


def comparison_check(h1: Callable, h2: Callable, r0: float, r_end: float = 15.0, n: int = 3, K0: float = -1.0,
                     A: Optional[float] = None, m: Optional[Callable] = None, r_start: float = 2.0,
                     f_start: float = 0.0, samples: int = 2000, tolerance: float = 1e-8) -> ComparisonResult:
    """
    Integrate f' + m f^2 + A e^{kappa r - I} = h with I' = 2(sqrt|K0| + f e^{-kappa r}) for h = h1 and h = h2
    from the same start, the forcing differing only on [r0, r_end], and check f >= g throughout.
    """
    sk = math.sqrt(abs(K0))
    kappa = (n - 1) * sk
    if A is None:
        A = 2.0 * choose_nu(n)[1] / (n - 1)
    if m is None:
        m = lambda r: (n - 1) / 2.0 * np.exp(-kappa * r)
    grid = np.linspace(r0, r_end, samples)
    if np.any(h1(grid) < h2(grid)) or A < 0 or np.any(m(np.linspace(r_start, r_end, samples)) < 0):
        raise ValueError("Comparison preconditions violated: need h1 >= h2 on [r0, r_end], A >= 0, m >= 0")

    def rhs_for(forcing_f, forcing_g):
        def rhs(r, y):
            f, i_f, g, i_g = y
            mr = float(m(r))
            return [forcing_f(r) - mr * f * f - A * math.exp(kappa * r - i_f), 2.0 * (sk + f * math.exp(-kappa * r)),
                    forcing_g(r) - mr * g * g - A * math.exp(kappa * r - i_g), 2.0 * (sk + g * math.exp(-kappa * r))]
        return rhs

    y = [f_start, 0.0, f_start, 0.0]
    rs, gaps, scales = [], [], []
    for lo, hi, ff in ((r_start, r0, h2), (r0, r_end, h1)):
        if hi <= lo:
            continue
        t_eval = np.linspace(lo, hi, samples)
        sol = solve_ivp(rhs_for(ff, h2), (lo, hi), y, method="RK45", t_eval=t_eval, rtol=1e-10, atol=1e-12)
        if sol.status != 0:
            raise StepSizeError(f"comparison integration stopped at r={sol.t[-1]:.6g}: {sol.message}")
        rs.append(sol.t)
        gaps.append(sol.y[0] - sol.y[2])
        scales.append(1.0 + np.abs(sol.y[2]))
        y = sol.y[:, -1]
    r, gap, scale = np.concatenate(rs), np.concatenate(gaps), np.concatenate(scales)
    relative = gap / scale
    worst = int(np.argmin(relative))
    return ComparisonResult(bool(relative[worst] >= -tolerance), float(gap[worst]), float(r[worst]))


def export_trajectory(trajectory: RiccatiTrajectory, path: str, r_grid, config_hash: Optional[str] = None) -> None:
    r = np.asarray(r_grid, dtype=float)
    f, fp, ell = trajectory.evaluate(r)
    write_csv(path, {"r": r, "f": f, "f_prime": fp, "w": trajectory.lambda_i * np.exp(-2.0 * ell)}, config_hash)

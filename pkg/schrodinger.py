"""
Solutions of the half-line eigen-equation -u'' + V u = lambda u with the Bessel-regular
behaviour at r = 0, the modified Pruefer flow and solution propagators.

Potentials are duck-typed: anything with `at(r)`, `tau`, `nu` and `breakpoints`
(see resonant_potential.Potential). Integration is split at the potential's breakpoints and
V is evaluated strictly inside each segment, so jumps are seen as one-sided limits.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from bessel import bessel_j, bessel_j_complex, bessel_j_prime, bessel_j_prime_complex, bessel_zeros
from config import SOLVER_ATOL, SOLVER_RTOL
from utils import write_csv

logger = logging.getLogger(__name__)

R_START = 0.5
PRUEFER_MAX_STEP = 0.5


class StepSizeError(RuntimeError):
    """Raised when the adaptive integrator cannot reach the requested radius."""


@dataclass(frozen=True)
class Energy:
    lam: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Energy must be positive, got {self.lam}")

    @property
    def k(self) -> float:
        return math.sqrt(self.lam)

    @property
    def k_bar(self) -> float:
        if self.lam <= self.tau**2:
            raise ValueError(f"k_bar is not real for lambda={self.lam} <= tau^2={self.tau ** 2}")
        return math.sqrt(self.lam - self.tau**2)


@dataclass(frozen=True)
class PrueferState:
    r: float
    logR2: float
    theta: float

    @classmethod
    def from_solution(cls, r: float, u: float, u_prime: float, k_bar: float) -> "PrueferState":
        return cls(r, math.log(u_prime**2 + k_bar**2 * u**2), math.atan2(k_bar * u, u_prime))

    def solution(self, k_bar: float) -> Tuple[float, float]:
        """(u, u') reconstructed from u = R sin(theta)/k_bar, u' = R cos(theta)."""
        R = math.exp(0.5 * self.logR2)
        return R * math.sin(self.theta) / k_bar, R * math.cos(self.theta)


@dataclass
class SolutionSamples:
    r: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray

    def wronskian(self, other: "SolutionSamples") -> np.ndarray:
        return self.u * other.u_prime - self.u_prime * other.u


@dataclass
class PrueferTrace:
    """Samples of the flow for several momenta; logR2 and theta have shape (len(k_bars), len(r))."""
    r: np.ndarray
    k_bars: np.ndarray
    logR2: np.ndarray
    theta: np.ndarray

    def state(self, index: int = 0) -> PrueferState:
        return PrueferState(float(self.r[-1]), float(self.logR2[index, -1]), float(self.theta[index, -1]))


def bessel_seed(nu: float, lam, r):
    """
    Closed-form regular solution u = sqrt(r) J_nu(sqrt(lam) r) and its r-derivative.

    lam may be real (>= 0) or complex; lam and r broadcast against each other.
    """
    lam = np.asarray(lam)
    r = np.asarray(r, dtype=float)
    if np.iscomplexobj(lam) or np.any(lam < 0):
        k = np.sqrt(lam.astype(complex))
        j, jp = bessel_j_complex(nu, k * r), bessel_j_prime_complex(nu, k * r)
    else:
        k = np.sqrt(lam.astype(float))
        j, jp = bessel_j(nu, k * r), bessel_j_prime(nu, k * r)
    sr = np.sqrt(r)
    return sr * j, j / (2.0 * sr) + sr * k * jp


def boundary_values(nu: float, lam) -> Tuple:
    """(u(1), u'(1)) of the regular solution; never both zero."""
    u, up = bessel_seed(nu, lam, 1.0)
    assert not np.any((np.abs(u) == 0) & (np.abs(up) == 0)), "regular solution cannot vanish with its derivative"
    return u, up


def lommel_norm(nu: float, lam, a: float):
    """Closed form of the integral of sqrt(r) J_nu(k r) squared over (0, a)."""
    k = np.sqrt(np.asarray(lam, dtype=float))
    x = k * a
    j, jp = bessel_j(nu, x), bessel_j_prime(nu, x)
    return 0.5 * a * a * (jp**2 + (1.0 - nu * nu / x**2) * j**2)


def _require_nu(V) -> float:
    if V.nu is None:
        raise ValueError("Regular solutions need a potential with a Bessel core (nu is not set)")
    return float(V.nu)


def _nodes(V, a: float, b: float):
    lo, hi = min(a, b), max(a, b)
    cuts = sorted(x for x in V.breakpoints if lo < x < hi)
    if b < a:
        cuts.reverse()
    return [a, *cuts, b]


def integrate(rhs: Callable, V, r0: float, y0, targets, rtol: float = SOLVER_RTOL, atol: float = SOLVER_ATOL,
              max_step: float = np.inf) -> np.ndarray:
    """
    Integrate y' = rhs(r, y, V(r)) from r0 to every target radius (either side of r0).

    Returns:
        Array of shape (len(y0), len(targets)) with the state at each target
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    y0 = np.asarray(y0)
    out = np.empty((y0.size, targets.size), dtype=y0.dtype)
    for forward in (True, False):
        mask = targets >= r0 if forward else targets < r0
        if not np.any(mask):
            continue
        chosen = targets[mask]
        end = float(chosen.max() if forward else chosen.min())
        values = np.empty((y0.size, chosen.size), dtype=y0.dtype)
        y = y0.copy()
        nodes = _nodes(V, r0, end)
        if end == r0:
            values[:] = y0[:, None]
        for a, b in zip(nodes, nodes[1:]):
            if a == b:
                continue
            lo, hi = min(a, b), max(a, b)
            eps = 1e-12 * max(1.0, hi)
            inside = (chosen >= lo) & (chosen <= hi)
            t_eval = np.unique(np.append(chosen[inside], b))
            if not forward:
                t_eval = t_eval[::-1]

            def fun(r, state, lo=lo, hi=hi, eps=eps):
                return rhs(r, state, V.at(min(max(r, lo + eps), hi - eps)))

            sol = solve_ivp(fun, (a, b), y, method="RK45", t_eval=t_eval, rtol=rtol, atol=atol, max_step=max_step)
            if sol.status != 0:
                raise StepSizeError(f"Integration stopped at r={sol.t[-1] if sol.t.size else a:.6g}: {sol.message}")
            order = np.argsort(sol.t)
            idx = order[np.searchsorted(sol.t[order], chosen[inside])]
            values[:, inside] = sol.y[:, idx]
            y = sol.y[:, -1]
        out[:, mask] = values
    return out


def _linear_rhs(lams: np.ndarray, with_norm: bool = False):
    n = lams.size

    def rhs(r, y, v):
        u, up = y[:n], y[n:2 * n]
        parts = [up, (v - lams) * u]
        if with_norm:
            parts.append(np.abs(u) ** 2)
        return np.concatenate(parts)

    return rhs


def regular_solution(V, lam, r_targets, r_start: float = R_START, rtol: float = SOLVER_RTOL,
                     atol: float = SOLVER_ATOL, max_step: float = np.inf) -> SolutionSamples:
    """
    Solution regular at 0, sqrt(r) J_nu(sqrt(lam) r) on (0, 1], continued outward through V.

    Args:
        V: potential equal to (nu^2-1/4)/r^2 on (0,1]
        lam: spectral parameter (real > 0 or complex)
        r_targets: radii to sample
        r_start: radius where the closed form hands over to the integrator

    Returns:
        SolutionSamples at r_targets
    """
    nu = _require_nu(V)
    targets = np.atleast_1d(np.asarray(r_targets, dtype=float))
    if np.any(targets <= 0):
        raise ValueError("Regular solution is sampled at r > 0 only")
    dtype = complex if np.iscomplexobj(lam) else float
    u = np.empty(targets.size, dtype=dtype)
    up = np.empty(targets.size, dtype=dtype)
    closed = targets <= r_start
    if np.any(closed):
        u[closed], up[closed] = bessel_seed(nu, lam, targets[closed])
    if np.any(~closed):
        u0, up0 = bessel_seed(nu, lam, r_start)
        lams = np.array([lam], dtype=dtype)
        states = integrate(_linear_rhs(lams), V, r_start, np.array([u0, up0], dtype=dtype), targets[~closed],
                           rtol, atol, max_step)
        u[~closed], up[~closed] = states[0], states[1]
    return SolutionSamples(targets, u, up)


def regular_solution_grid(V, lams, r_targets, with_norm: bool = False, r_start: float = R_START,
                          rtol: float = SOLVER_RTOL, atol: float = SOLVER_ATOL, max_step: float = np.inf):
    """
    Regular solutions for many real energies at once.

    Returns:
        (u, u', norm) arrays of shape (len(lams), len(r_targets)); norm is the integral of u^2 over
        (0, r) (None unless with_norm). Targets must lie at or beyond r_start.
    """
    nu = _require_nu(V)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    targets = np.atleast_1d(np.asarray(r_targets, dtype=float))
    if np.any(targets < r_start):
        raise ValueError(f"Grid solutions are sampled at r >= {r_start}")
    u0, up0 = bessel_seed(nu, lams, r_start)
    y0 = [u0, up0]
    if with_norm:
        y0.append(lommel_norm(nu, lams, r_start))
    states = integrate(_linear_rhs(lams, with_norm), V, r_start, np.concatenate(y0), targets, rtol, atol, max_step)
    n = lams.size
    norm = states[2 * n:] if with_norm else None
    return states[:n], states[n:2 * n], norm


def theta_phi_solutions(V, lam, r_targets, rtol: float = SOLVER_RTOL, atol: float = SOLVER_ATOL,
                        max_step: float = np.inf) -> Tuple[SolutionSamples, SolutionSamples]:
    """Solutions with theta(1)=1, theta'(1)=0 and phi(1)=0, phi'(1)=1, integrated both ways from r=1."""
    dtype = complex if np.iscomplexobj(lam) else float
    targets = np.atleast_1d(np.asarray(r_targets, dtype=float))
    lams = np.array([lam, lam], dtype=dtype)
    y0 = np.array([1.0, 0.0, 0.0, 1.0], dtype=dtype)
    states = integrate(_linear_rhs(lams), V, 1.0, y0, targets, rtol, atol, max_step)
    return (SolutionSamples(targets, states[0], states[2]),
            SolutionSamples(targets, states[1], states[3]))


def transfer_matrix(V, lam: float, r0: float, r1: float, rtol: float = SOLVER_RTOL, atol: float = SOLVER_ATOL,
                    max_step: float = np.inf) -> np.ndarray:
    """Propagator of (u, u') from r0 to r1."""
    if r0 == r1:
        return np.eye(2)
    lams = np.array([lam, lam], dtype=float)
    states = integrate(_linear_rhs(lams), V, r0, np.array([1.0, 0.0, 0.0, 1.0]), [r1], rtol, atol, max_step)[:, 0]
    return np.array([[states[0], states[1]], [states[2], states[3]]])


def _pruefer_rhs(k_bars: np.ndarray, tau2: float):
    n = k_bars.size

    def rhs(r, y, v):
        theta = y[n:]
        x = v - tau2
        return np.concatenate([x * np.sin(2.0 * theta) / k_bars, k_bars - x * np.sin(theta) ** 2 / k_bars])

    return rhs


def pruefer_trace(V, k_bars, r0: float, r1: float, logR2_0, theta_0, samples: Optional[Sequence[float]] = None,
                  rtol: float = SOLVER_RTOL, atol: float = SOLVER_ATOL,
                  max_step: float = PRUEFER_MAX_STEP) -> PrueferTrace:
    """
    Advance the modified Pruefer variables for several momenta k_bar = sqrt(lambda - tau^2) at once.

    (log R^2)' = (V - tau^2) sin(2 theta)/k_bar,  theta' = k_bar - (V - tau^2) sin(theta)^2 / k_bar
    """
    k_bars = np.atleast_1d(np.asarray(k_bars, dtype=float))
    if np.any(k_bars <= 0):
        raise ValueError("Pruefer flow needs lambda > tau^2 (real k_bar)")
    if r0 < 1:
        raise ValueError(f"Pruefer flow starts at r0 >= 1, got {r0}")
    points = np.array([r1], dtype=float) if samples is None else np.asarray(samples, dtype=float)
    y0 = np.concatenate([np.broadcast_to(logR2_0, k_bars.shape), np.broadcast_to(theta_0, k_bars.shape)]).astype(float)
    step = min(max_step, 0.2 / float(k_bars.max()))
    states = integrate(_pruefer_rhs(k_bars, V.tau**2), V, r0, y0, points, rtol, atol, step)
    n = k_bars.size
    return PrueferTrace(points, k_bars, states[:n], states[n:])


def pruefer_flow(V, energy: Energy, r0: float, r1: float, initial: PrueferState, rtol: float = SOLVER_RTOL,
                 atol: float = SOLVER_ATOL, max_step: float = PRUEFER_MAX_STEP) -> PrueferState:
    if abs(energy.tau - V.tau) > 1e-12:
        raise ValueError("Energy and potential disagree on tau")
    trace = pruefer_trace(V, [energy.k_bar], r0, r1, initial.logR2, initial.theta, None, rtol, atol, max_step)
    return trace.state(0)


def regular_pruefer_seed(V, k_bars):
    """(logR2, theta) at r = 1 of the regular solution for each k_bar."""
    k_bars = np.atleast_1d(np.asarray(k_bars, dtype=float))
    u, up = boundary_values(_require_nu(V), V.tau**2 + k_bars**2)
    return np.log(up**2 + k_bars**2 * u**2), np.arctan2(k_bars * u, up)


def _zeros_below(nu: float, x: np.ndarray) -> np.ndarray:
    """Number of positive zeros of J_nu in (0, x] for each x."""
    top = float(np.max(x))
    if top <= nu:
        return np.zeros_like(x)
    zeros = np.asarray(bessel_zeros(nu, int(top / np.pi) + 3))
    return np.searchsorted(zeros, x, side="right").astype(float)


def rotation_angle(V, lams, L: float, r_start: float = R_START, rtol: float = 1e-9, atol: float = 1e-11,
                   max_step: float = 0.25) -> np.ndarray:
    """
    Scaled Pruefer angle at L of the regular solution, tan(angle) = s u/u' with s = sqrt(max(lambda, 1)).

    The angle is continuous and increasing in lambda; u(L) = 0 exactly when it is a multiple of pi.
    """
    nu = _require_nu(V)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    s = np.sqrt(np.maximum(lams, 1.0))
    u0, up0 = bessel_seed(nu, lams, r_start)
    # branch of the angle that starts at 0 at r = 0: one pi per zero of u inside (0, r_start]
    passed = _zeros_below(nu, np.sqrt(np.maximum(lams, 0.0)) * r_start)
    angle0 = np.mod(np.arctan2(s * u0, up0), np.pi) + np.pi * passed

    def rhs(r, angle, v):
        return s * np.cos(angle) ** 2 + (lams - v) / s * np.sin(angle) ** 2

    step = min(max_step, 0.2 / float(s.max()))
    return integrate(rhs, V, r_start, angle0, [L], rtol, atol, step)[:, 0]


def export_trace(trace: PrueferTrace, path: str, index: int = 0, config_hash: Optional[str] = None) -> None:
    write_csv(path, {"r": trace.r, "logR2": trace.logR2[index], "theta": trace.theta[index]}, config_hash)

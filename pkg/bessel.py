"""
Bessel functions J_nu of real order nu >= 0.

Power series below the switch radius, Hankel large-argument expansion above it.
All functions accept scalars or numpy arrays.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from config import BESSEL_SERIES_TERMS, BESSEL_SWITCH_RADIUS, BESSEL_TOLERANCE

logger = logging.getLogger(__name__)

# exp() of larger arguments overflows a double
_LOG_OVERFLOW = 700.0
_HANKEL_MAX_TERMS = 60


class BesselDomainError(ValueError):
    """Raised when J_nu cannot be represented (overflow) or the order/argument is out of range."""


@dataclass(frozen=True)
class BesselConfig:
    series_terms: int = BESSEL_SERIES_TERMS
    switch_radius: float = BESSEL_SWITCH_RADIUS
    tolerance: float = BESSEL_TOLERANCE
    overflow_guard: float = _LOG_OVERFLOW

    def __post_init__(self):
        if self.series_terms < 20:
            raise ValueError(f"series_terms must be >= 20, got {self.series_terms}")
        if self.switch_radius < 10:
            raise ValueError(f"switch_radius must be >= 10, got {self.switch_radius}")
        if not 0 < self.tolerance <= 1e-6:
            raise ValueError(f"tolerance must lie in (0, 1e-6], got {self.tolerance}")


DEFAULT_CONFIG = BesselConfig()


def _series(nu: float, z: np.ndarray, terms: int) -> np.ndarray:
    # leading term (z/2)^nu / Gamma(nu+1), then t_k = t_{k-1} * (-(z/2)^2) / (k (k+nu))
    half = z / 2.0
    log_lead = nu * np.log(half) - gammaln(nu + 1.0)
    if np.any(np.real(log_lead) > _LOG_OVERFLOW):
        raise BesselDomainError(f"J_{nu} series leading term overflows (nu*log(z/2) too large)")
    term = np.exp(log_lead)
    total = term.copy()
    q = -half * half
    for k in range(1, terms):
        term = term * q / (k * (k + nu))
        total = total + term
    return total


def _hankel(nu: float, z: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    p = np.ones_like(z)
    q = np.zeros_like(z)
    a = np.ones_like(z)
    previous = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _HANKEL_MAX_TERMS):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        size = np.abs(a)
        # stop each element once the asymptotic terms start growing; for large nu the first
        # terms grow until k passes nu + 1/2
        active &= (size < previous) | (k <= nu + 1.0)
        previous = size
        if not np.any(active):
            break
        contribution = np.where(active, a, 0.0)
        if k % 2 == 0:
            p = p + (-1) ** (k // 2) * contribution
        else:
            q = q + (-1) ** ((k - 1) // 2) * contribution
        active &= size > 1e-17
    omega = z - nu * np.pi / 2.0 - np.pi / 4.0
    return np.sqrt(2.0 / (np.pi * z)) * (p * np.cos(omega) - q * np.sin(omega))


def _evaluate(nu: float, z: np.ndarray, cfg: BesselConfig) -> np.ndarray:
    if nu < 0:
        raise BesselDomainError(f"Order must be non-negative, got {nu}")
    out = np.zeros(z.shape, dtype=z.dtype)
    small = np.abs(z) < cfg.switch_radius
    zero = z == 0
    if np.any(zero):
        out[zero] = 1.0 if nu == 0 else 0.0
    series_mask = small & ~zero
    if np.any(series_mask):
        out[series_mask] = _series(nu, z[series_mask], cfg.series_terms)
    if np.any(~small):
        out[~small] = _hankel(nu, z[~small])
    if not np.all(np.isfinite(out)):
        raise BesselDomainError(f"J_{nu} evaluation produced non-finite values")
    return out


def bessel_j(nu: float, x, cfg: BesselConfig = DEFAULT_CONFIG):
    """
    J_nu(x) for real x >= 0.

    Args:
        nu: order, nu >= 0
        x: argument(s), x >= 0
        cfg: evaluation configuration

    Returns:
        float or ndarray matching the shape of x
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise BesselDomainError("bessel_j expects non-negative real arguments")
    out = _evaluate(float(nu), np.atleast_1d(arr), cfg)
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def bessel_j_prime(nu: float, x, cfg: BesselConfig = DEFAULT_CONFIG):
    """J_nu'(x) from the recurrence J_nu' = (nu/x) J_nu - J_{nu+1}."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(arr)
    zero = arr == 0
    if np.any(zero):
        if nu == 0 or nu > 1:
            out[zero] = 0.0
        elif nu == 1:
            out[zero] = 0.5
        else:
            raise BesselDomainError(f"J_{nu}' is unbounded at x=0 for 0<nu<1")
    pos = ~zero
    if np.any(pos):
        xp = arr[pos]
        out[pos] = nu / xp * bessel_j(nu, xp, cfg) - bessel_j(nu + 1.0, xp, cfg)
    return out if np.ndim(x) else float(out[0])


def bessel_j_complex(nu: float, z, cfg: BesselConfig = DEFAULT_CONFIG):
    """Analytic continuation of J_nu to complex z (principal branch of z^nu)."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(np.abs(arr) > cfg.overflow_guard):
        raise BesselDomainError(f"|z| exceeds the overflow guard {cfg.overflow_guard}")
    out = _evaluate(float(nu), arr, cfg)
    return out if np.ndim(z) else complex(out[0])


def bessel_j_prime_complex(nu: float, z, cfg: BesselConfig = DEFAULT_CONFIG):
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty_like(arr)
    zero = arr == 0
    if np.any(zero):
        out[zero] = complex(bessel_j_prime(nu, 0.0, cfg))
    nz = ~zero
    if np.any(nz):
        out[nz] = nu / arr[nz] * bessel_j_complex(nu, arr[nz], cfg) - bessel_j_complex(nu + 1.0, arr[nz], cfg)
    return out if np.ndim(z) else complex(out[0])


def bessel_zeros(nu: float, count: int, cfg: BesselConfig = DEFAULT_CONFIG) -> List[float]:
    """
    First `count` positive zeros of J_nu, in increasing order.

    Zeros are bracketed on a grid finer than their asymptotic spacing pi and refined with brentq.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    step = 0.25
    f = lambda t: bessel_j(nu, t, cfg)
    roots: List[float] = []
    a = max(float(nu), 1e-3)
    fa = f(a)
    while len(roots) < count:
        b = a + step
        fb = f(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))
        a, fa = b, fb
    logger.debug(f"First {count} zeros of J_{nu}: {roots}")
    return roots


def bessel_ode_residual(nu: float, x, cfg: BesselConfig = DEFAULT_CONFIG):
    """
    y'' + y'/x + (1 - nu^2/x^2) y for y = J_nu, with J_nu'' = (J_{nu-1}' - J_{nu+1}')/2.

    Needs nu >= 1 so that every order in the recurrence stays non-negative.
    """
    if nu < 1:
        raise BesselDomainError(f"Residual by recurrence needs nu >= 1, got {nu}")
    x = np.asarray(x, dtype=float)
    j, jp = bessel_j(nu, x, cfg), bessel_j_prime(nu, x, cfg)
    jpp = 0.5 * (bessel_j_prime(nu - 1.0, x, cfg) - bessel_j_prime(nu + 1.0, x, cfg))
    return jpp + jp / x + (1.0 - nu * nu / (x * x)) * j


def seam_gap(nu: float, cfg: BesselConfig = DEFAULT_CONFIG) -> float:
    """|series - asymptotic| at the switch radius."""
    z = np.array([cfg.switch_radius])
    return float(np.abs(_series(nu, z, cfg.series_terms) - _hankel(nu, z))[0])


def zeros_interlace(nu: float, count: int = 10, cfg: BesselConfig = DEFAULT_CONFIG) -> bool:
    """j_{nu,k} < j_{nu+1,k} < j_{nu,k+1} for the first `count` zeros."""
    lower = bessel_zeros(nu, count + 1, cfg)
    upper = bessel_zeros(nu + 1.0, count, cfg)
    return all(lower[k] < upper[k] < lower[k + 1] for k in range(count))


def oracle_report(orders: Sequence[float] = (1.5,), seed: int = 0, samples: int = 100,
                  cfg: BesselConfig = DEFAULT_CONFIG) -> Dict[str, float]:
    """Closed forms, ODE residual, seam agreement and interlacing as one set of numbers."""
    x = np.linspace(0.1, 50.0, 2000)
    scale = np.sqrt(2.0 / (np.pi * x))
    closed = {
        0.5: scale * np.sin(x),
        1.5: scale * (np.sin(x) / x - np.cos(x)),
        2.5: scale * ((3.0 / x**2 - 1.0) * np.sin(x) - 3.0 * np.cos(x) / x),
    }
    closed_error = max(float(np.max(np.abs(bessel_j(nu, x, cfg) - ref))) for nu, ref in closed.items())
    rng = np.random.Generator(np.random.Philox(seed))
    nus, xs = rng.uniform(1.0, 3.0, samples), rng.uniform(0.1, 50.0, samples)
    residual = max(abs(float(bessel_ode_residual(nu, xv, cfg))) for nu, xv in zip(nus, xs))
    checked = sorted(set(closed) | {float(nu) for nu in orders})
    return {
        "closed_form_error": closed_error,
        "ode_residual": residual,
        "seam_gap": max(seam_gap(nu, cfg) for nu in checked),
        "interlacing": all(zeros_interlace(nu, 10, cfg) for nu in checked),
    }

"""
Warp profile f1 of the rotationally symmetric metric dr^2 + f1(r)^2 g_sphere, its radial
curvature, and the effective one-dimensional potential of a spherical mode.

The profile is represented through L = log f1 and its first two derivatives.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from utils import smooth_step_derivatives, write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifoldParams:
    n: int
    K0: float
    h: Callable
    b: float = 10.0
    delta: float = 0.1
    mode_index: Optional[int] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"Dimension n must be >= 2, got {self.n}")
        if not self.K0 < 0:
            raise ValueError(f"K0 must be negative, got {self.K0}")
        if self.b < 10:
            raise ValueError(f"b must be >= 10, got {self.b}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta must satisfy 0<delta<1/2, got {self.delta}")
        if self.mode_index is not None and self.bessel_offset + sphere_mode(self.n, self.mode_index)[0] < 1:
            raise ValueError(f"Mode i={self.mode_index} gives nu <= 1 for n={self.n}")

    @property
    def sqrt_k(self) -> float:
        return math.sqrt(abs(self.K0))

    @property
    def tau(self) -> float:
        return (self.n - 1) * self.sqrt_k / 2.0

    @property
    def bessel_offset(self) -> float:
        return (self.n - 1) * (self.n - 3) / 4.0

    @property
    def mode(self) -> Tuple[int, float, float]:
        """(i, lambda_i, nu) of the selected spherical mode."""
        if self.mode_index is None:
            return choose_nu(self.n)
        lam = sphere_mode(self.n, self.mode_index)[0]
        return self.mode_index, lam, math.sqrt(self.bessel_offset + lam + 0.25)

    def with_delta(self, delta: float) -> "ManifoldParams":
        return ManifoldParams(self.n, self.K0, self.h, self.b, delta, self.mode_index)


def sphere_mode(n: int, i: int) -> Tuple[float, int]:
    """Eigenvalue i(i+n-2) of the round S^{n-1} and its multiplicity."""
    if n < 2 or i < 0:
        raise ValueError(f"Need n >= 2 and i >= 0, got n={n}, i={i}")
    lam = float(i * (i + n - 2))
    if i == 0:
        return lam, 1
    return lam, math.comb(n + i - 1, i) - (math.comb(n + i - 3, i - 2) if i >= 2 else 0)


def choose_nu(n: int) -> Tuple[int, float, float]:
    """Smallest mode with (n-1)(n-3)/4 + lambda_i >= 1, so that nu > 1."""
    offset = (n - 1) * (n - 3) / 4.0
    i = 0
    while True:
        lam, _ = sphere_mode(n, i)
        if offset + lam >= 1:
            return i, lam, math.sqrt(offset + lam + 0.25)
        i += 1


class WarpProfile:
    """
    Evaluators for f1, f1', f1'' on (0, r_end].

    Pieces: Euclidean f1 = r on (0,1], log-space C-infinity blend on (1,2), exponential
    e^{(sqrt|K0|+1)(r-2)} on [2, b-delta], and the Riccati perturbation beyond b-delta.
    """

    def __init__(self, params: ManifoldParams, perturbation=None):
        self.params = params
        self.perturbation = perturbation
        self.slope = params.sqrt_k + 1.0
        self.join = params.b - params.delta
        self.r_end = perturbation.r_end if perturbation is not None else np.inf
        self.boundaries = (1.0, 2.0, params.b - params.delta, params.b + params.delta)

    def log_derivatives(self, r):
        """Return (L, L', L'') with L = log f1."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("Warp profile is defined for r > 0")
        if np.any(r > self.r_end):
            raise ValueError(f"Profile evaluated beyond the solved range r_end={self.r_end}")
        shape = r.shape
        r = np.atleast_1d(r)
        L = np.empty_like(r)
        L1 = np.empty_like(r)
        L2 = np.empty_like(r)
        a = self.slope

        flat = r <= 1.0
        L[flat] = np.log(r[flat])
        L1[flat] = 1.0 / r[flat]
        L2[flat] = -1.0 / r[flat] ** 2

        blend = (r > 1.0) & (r < 2.0)
        if np.any(blend):
            x = r[blend]
            s, s1, s2 = smooth_step_derivatives(x - 1.0)
            g1, g1p, g1pp = np.log(x), 1.0 / x, -1.0 / x**2
            g2, g2p = a * (x - 2.0), a
            L[blend] = g1 + s * (g2 - g1)
            L1[blend] = g1p + s1 * (g2 - g1) + s * (g2p - g1p)
            L2[blend] = g1pp + s2 * (g2 - g1) + 2.0 * s1 * (g2p - g1p) - s * g1pp

        mid = (r >= 2.0) & (r <= self.join)
        if self.perturbation is None:
            mid = r >= 2.0
        L[mid] = a * (r[mid] - 2.0)
        L1[mid] = a
        L2[mid] = 0.0

        tail = ~(flat | blend | mid)
        if np.any(tail):
            f, fp, ell = self.perturbation.evaluate(r[tail])
            L[tail] = ell
            L1[tail] = self.params.sqrt_k + f
            L2[tail] = fp
        assert np.all(np.isfinite(L)), "log f1 must stay finite (f1 > 0)"
        return L.reshape(shape), L1.reshape(shape), L2.reshape(shape)

    def f1(self, r):
        with np.errstate(over="ignore"):
            return np.exp(self.log_derivatives(r)[0])

    def f1_prime(self, r):
        L, L1, _ = self.log_derivatives(r)
        with np.errstate(over="ignore", invalid="ignore"):
            return L1 * np.exp(L)

    def f1_second(self, r):
        L, L1, L2 = self.log_derivatives(r)
        with np.errstate(over="ignore", invalid="ignore"):
            return (L2 + L1**2) * np.exp(L)


def build_profile(params: ManifoldParams, perturbation=None) -> WarpProfile:
    """
    Assemble the warp profile.

    Args:
        params: manifold parameters
        perturbation: solved Riccati trajectory (f = 1 continued on [2, inf) when None)

    Returns:
        WarpProfile
    """
    if perturbation is not None and abs(perturbation.r_start - (params.b - params.delta)) > 1e-12:
        raise ValueError("Perturbation must start at b - delta")
    profile = WarpProfile(params, perturbation)
    logger.info(f"Built warp profile: n={params.n}, K0={params.K0}, b={params.b}, delta={params.delta}, "
                f"r_end={profile.r_end}")
    return profile


def radial_curvature(profile: WarpProfile, r):
    """K_rad = -f1''/f1 = -(L'' + L'^2)."""
    _, L1, L2 = profile.log_derivatives(r)
    return -(L2 + L1**2)


def effective_potential(profile: WarpProfile, lambda_i: float, r):
    """V_i = (n-1)(n-3)/4 (f1'/f1)^2 + (n-1)/2 f1''/f1 + lambda_i/f1^2."""
    n = profile.params.n
    L, L1, L2 = profile.log_derivatives(r)
    with np.errstate(under="ignore"):
        return (n - 1) * (n - 3) / 4.0 * L1**2 + (n - 1) / 2.0 * (L2 + L1**2) + lambda_i * np.exp(-2.0 * L)


def mean_curvature(profile: WarpProfile, r):
    """Laplacian of the distance function, (n-1) f1'/f1."""
    return (profile.params.n - 1) * profile.log_derivatives(r)[1]


def tilde_potential(params: ManifoldParams) -> Callable:
    """Effective potential of the unperturbed profile (f = 1 on [2, inf))."""
    profile = WarpProfile(params)
    lam = params.mode[1]
    return lambda r: effective_potential(profile, lam, r)


def export_profile(profile: WarpProfile, path: str, r_grid, config_hash: Optional[str] = None) -> None:
    lam = profile.params.mode[1]
    r = np.asarray(r_grid, dtype=float)
    write_csv(path, {
        "r": r,
        "f1": profile.f1(r),
        "f1_prime": profile.f1_prime(r),
        "f1_second": profile.f1_second(r),
        "K_rad": radial_curvature(profile, r),
        "V_eff": effective_potential(profile, lam, r),
    }, config_hash)

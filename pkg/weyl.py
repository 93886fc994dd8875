"""
Weyl m-functions at both sides of r = 1, the spectral matrix, the spectral measure (by Stieltjes
inversion or from a truncated Dirichlet problem) and the generalized Fourier transform.

Conventions: M_minus = u'(1)/u(1) for the solution regular at 0 and M_plus = u'(1)/u(1) for the
solution square integrable at infinity, so Im M_minus < 0 < Im M_plus on the upper half plane and
M11 = 1/(M_minus - M_plus), M12 = M_minus M11, M22 = M_minus M_plus M11 are Herglotz.
The scalar measure is d rho = d rho11 / J_nu(sqrt(lambda))^2.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad, simpson

from bessel import bessel_j, bessel_j_complex, bessel_j_prime, bessel_j_prime_complex, bessel_zeros
from schrodinger import (R_START, bessel_seed, integrate, regular_solution_grid, rotation_angle)
from utils import write_csv

logger = logging.getLogger(__name__)

POLE_THRESHOLD = 1e-8
R_PLUS_MIN = 200.0
R_PLUS_CAP = 2.0e4
DEFAULT_Y_SEQUENCE = (0.1, 0.05, 0.025)


class PoleProximityError(ValueError):
    """Raised when sqrt(z) is too close to a zero of J_nu for the closed-form M_minus."""

    def __init__(self, message: str, nearest_zero: float):
        super().__init__(message)
        self.nearest_zero = nearest_zero


class WeylConvergenceError(RuntimeError):
    """Raised when M_plus changes under doubling of the cut-off radius."""


class MissedEigenvalueError(RuntimeError):
    """Raised when located eigenvalues disagree with the rotation count."""


class SupportError(ValueError):
    """Raised when a transformed function is not supported inside the solved range."""


@dataclass
class MFunctionSample:
    z: complex
    m_minus: complex
    m_plus: complex
    error: float


@dataclass
class SpectralMatrixSample:
    z: np.ndarray
    M11: np.ndarray
    M12: np.ndarray
    M22: np.ndarray

    def is_herglotz(self, tolerance: float = 0.0) -> bool:
        """Im M >= 0 as a 2x2 matrix: diagonal entries and the determinant of the imaginary part."""
        im11, im12, im22 = np.imag(self.M11), np.imag(self.M12), np.imag(self.M22)
        det = im11 * im22 - im12**2
        return bool(np.all(im11 >= -tolerance) and np.all(im22 >= -tolerance)
                    and np.all(det >= -tolerance * (1.0 + np.abs(im11 * im22))))


@dataclass
class WeylDiskSample:
    z: complex
    left: float
    left_expected: float
    right: float
    right_expected: float


@dataclass
class MeasureGrid:
    edges: np.ndarray
    drho: np.ndarray
    drho11: np.ndarray
    drho12: np.ndarray
    drho22: np.ndarray
    method: str
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0))
    jumps: np.ndarray = field(default_factory=lambda: np.empty(0))
    y_trend: Optional[np.ndarray] = None

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def coarsen(self, factor: int) -> "MeasureGrid":
        """Merge groups of `factor` adjacent cells."""
        cells = len(self.drho) - len(self.drho) % factor
        merge = lambda a: a[:cells].reshape(-1, factor).sum(axis=1)
        return MeasureGrid(self.edges[:cells + 1:factor], merge(self.drho), merge(self.drho11),
                           merge(self.drho12), merge(self.drho22), self.method, self.eigenvalues, self.jumps)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "lambda_lo": self.edges[:-1],
            "lambda_hi": self.edges[1:],
            "drho": self.drho,
            "drho11": self.drho11,
            "drho12": self.drho12,
            "drho22": self.drho22,
            "method": self.method,
        })

    def export(self, path: str, config_hash: Optional[str] = None) -> None:
        write_csv(path, self.to_frame().to_dict(orient="list"), config_hash)


def _nearest_zero(nu: float, k) -> float:
    top = float(np.max(np.abs(k)))
    count = max(1, int(top / np.pi) + 3)
    zeros = np.array(bessel_zeros(nu, count))
    return float(zeros[np.argmin(np.abs(zeros - top))])


def m_minus_closed(z, nu: float, threshold: float = POLE_THRESHOLD):
    """
    M_minus(z) = 1/2 + sqrt(z) J_nu'(sqrt(z)) / J_nu(sqrt(z)).

    Raises:
        PoleProximityError: |J_nu(sqrt z)| below threshold (reports the nearest zero of J_nu)
    """
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    k = np.sqrt(arr)
    j = bessel_j_complex(nu, k)
    jp = bessel_j_prime_complex(nu, k)
    close = np.abs(j) < threshold
    if np.any(close):
        zero = _nearest_zero(nu, k[close])
        raise PoleProximityError(f"sqrt(z) is within reach of the Bessel zero j={zero:.10g} "
                                 f"(lambda={zero ** 2:.10g})", zero)
    m = 0.5 + k * jp / j
    return m if np.ndim(z) else complex(m[0])


def _plus_radius(V, zs: np.ndarray) -> float:
    s = np.sqrt(zs - V.tau**2)
    radius = max(R_PLUS_MIN, 30.0 / float(np.min(s.imag)))
    return float(min(radius, V.r_max, R_PLUS_CAP))


def m_plus_many(V, zs, R: Optional[float] = None, rtol: float = 1e-10, atol: float = 1e-12,
                max_step: float = 0.5) -> np.ndarray:
    """
    M_plus for a batch of spectral parameters by integrating m' = (V - z) - m^2 backward from R,
    seeded with the free value i sqrt(z - tau^2).
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if np.any(zs.imag <= 0):
        raise ValueError("M_plus is computed on the open upper half plane")
    R = _plus_radius(V, zs) if R is None else R
    seed = 1j * np.sqrt(zs - V.tau**2)

    def rhs(r, m, v):
        return (v - zs) - m * m

    return integrate(rhs, V, R, seed, [1.0], rtol, atol, max_step)[:, 0]


def m_plus(V, z: complex, R: Optional[float] = None, tolerance: float = 1e-6) -> Tuple[complex, float]:
    """
    M_plus(z) with an error estimate from a second cut-off radius.

    Returns:
        (value, error) where error = |M_plus(R) - M_plus(R')|, R' = 2R (or R/2 at the cap)

    Raises:
        WeylConvergenceError: error above tolerance * (1 + |value|)
    """
    z = complex(z)
    R = _plus_radius(V, np.array([z])) if R is None else R
    other = 2.0 * R if 2.0 * R <= min(V.r_max, R_PLUS_CAP) else R / 2.0
    first, second = m_plus_many(V, [z], R)[0], m_plus_many(V, [z], other)[0]
    value = second if other > R else first
    error = abs(first - second)
    if error > tolerance * (1.0 + abs(value)):
        raise WeylConvergenceError(f"M_plus({z}) changed by {error:.3e} between R={R:g} and R={other:g}")
    logger.debug(f"M_plus({z}) = {value} (error {error:.2e}, R={max(R, other):g})")
    return complex(value), float(error)


def m_function(V, z: complex) -> MFunctionSample:
    value, error = m_plus(V, z)
    return MFunctionSample(complex(z), m_minus_closed(z, V.nu), value, error)


def spectral_matrix(m_minus, m_plus_value, z=None) -> SpectralMatrixSample:
    m_minus = np.asarray(m_minus, dtype=complex)
    m_plus_value = np.asarray(m_plus_value, dtype=complex)
    denominator = m_minus - m_plus_value
    if np.any(denominator == 0):
        raise ValueError("Degenerate spectral matrix: M_minus == M_plus")
    M11 = 1.0 / denominator
    return SpectralMatrixSample(np.asarray(z), M11, m_minus * M11, m_minus * m_plus_value * M11)


def weyl_disk_integrals(V, z: complex, R: Optional[float] = None) -> WeylDiskSample:
    """
    Both sides of the Weyl identities: integral over (0,1) of |psi1|^2 = -Im M_minus / Im z and
    integral over (1, inf) of |psi2|^2 = Im M_plus / Im z, with psi normalized to 1 at r = 1.
    """
    z = complex(z)
    nu = float(V.nu)
    k = np.sqrt(z)
    j1 = complex(bessel_j_complex(nu, k))
    left = quad(lambda r: abs(math.sqrt(r) * complex(bessel_j_complex(nu, k * r)) / j1) ** 2, 0.0, 1.0,
                limit=200, epsabs=1e-13, epsrel=1e-10)[0]
    m_minus = m_minus_closed(z, nu)

    R = _plus_radius(V, np.array([z])) if R is None else R
    s = np.sqrt(z - V.tau**2)

    def rhs(r, y, v):
        m, g = y[0], y[1]
        return np.array([(v - z) - m * m, m, -math.exp(2.0 * g.real)], dtype=complex)

    state = integrate(rhs, V, R, np.array([1j * s, 0.0, 0.0], dtype=complex), [1.0], 1e-10, 1e-12, 0.5)[:, 0]
    m_plus_value, log_u1, partial = state
    # free decay beyond R contributes |u(R)|^2 / (2 Im s)
    right = (partial.real + 1.0 / (2.0 * s.imag)) / math.exp(2.0 * log_u1.real)
    return WeylDiskSample(z, left, -m_minus.imag / z.imag, right, m_plus_value.imag / z.imag)


def free_spectral_density(lam, nu: float, tau: float):
    """Density d rho / d lambda for the Bessel core with V = tau^2 beyond r = 1."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.zeros_like(lam)
    band = lam > tau**2
    if np.any(band):
        s = np.sqrt(lam[band] - tau**2)
        u1, up1 = bessel_seed(nu, lam[band], 1.0)
        out[band] = s / (np.pi * (up1**2 + s**2 * u1**2))
    return out


def _extrapolate(ys: Sequence[float], values: Sequence[np.ndarray]) -> np.ndarray:
    """Lagrange extrapolation to y = 0 through the given points."""
    total = np.zeros_like(values[0])
    for i, (yi, vi) in enumerate(zip(ys, values)):
        weight = 1.0
        for j, yj in enumerate(ys):
            if j != i:
                weight *= (0.0 - yj) / (yi - yj)
        total = total + weight * vi
    return total


def _scalar_weight(nu: float, x: np.ndarray):
    """Per point: use 1/J^2 with M11, or 1/J~'(1)^2 with M22 near zeros of J."""
    k = np.sqrt(x)
    j = bessel_j(nu, k)
    jt_prime = j / 2.0 + k * bessel_j_prime(nu, k)
    use_11 = np.abs(j) >= np.abs(jt_prime)
    return use_11, j, jt_prime


def stieltjes_measure(V, edges, y_sequence: Sequence[float] = DEFAULT_Y_SEQUENCE, points_per_cell: int = 33,
                      R: Optional[float] = None) -> MeasureGrid:
    """
    Spectral measure increments by Stieltjes inversion, (1/pi) times the integral of Im M_jk(x + iy),
    extrapolated to y -> 0 through the smallest three y (two if only two are given).
    """
    edges = np.asarray(edges, dtype=float)
    if edges[0] <= 0 or np.any(np.diff(edges) <= 0):
        raise ValueError("Cell edges must be positive and increasing")
    ys = sorted(float(y) for y in y_sequence)[:3]
    if len(ys) < 2:
        raise ValueError("Need at least two y values for the y -> 0 extrapolation")
    points = points_per_cell + (1 - points_per_cell % 2)
    nu = float(V.nu)
    frac = np.linspace(0.0, 1.0, points)
    x = edges[:-1, None] + np.diff(edges)[:, None] * frac[None, :]
    use_11, j, jt_prime = _scalar_weight(nu, x)

    per_y = {name: [] for name in ("drho", "drho11", "drho12", "drho22")}
    for y in ys:
        z = x.ravel() + 1j * y
        matrix = spectral_matrix(m_minus_closed(z, nu), m_plus_many(V, z, R), z)
        im11, im12, im22 = (np.imag(m).reshape(x.shape) / np.pi for m in (matrix.M11, matrix.M12, matrix.M22))
        scalar = np.where(use_11, im11 / np.where(use_11, j, 1.0) ** 2, im22 / np.where(use_11, 1.0, jt_prime) ** 2)
        for name, density in (("drho", scalar), ("drho11", im11), ("drho12", im12), ("drho22", im22)):
            per_y[name].append(simpson(density, x=x, axis=1))
        logger.debug(f"Stieltjes pass y={y} over {x.size} points")

    limits = {name: _extrapolate(ys, values) for name, values in per_y.items()}
    trend = limits["drho"] - per_y["drho"][0]
    linear = _extrapolate(ys[:2], per_y["drho"][:2])
    unstable = np.abs(linear - limits["drho"]) > 0.1 * np.maximum(np.abs(limits["drho"]), 1e-8)
    if np.any(unstable):
        logger.warning(f"y -> 0 extrapolation unstable on {int(unstable.sum())} cells "
                       f"(first at lambda={edges[:-1][unstable][0]:.6g})")
    return MeasureGrid(edges, limits["drho"], limits["drho11"], limits["drho12"], limits["drho22"], "stieltjes",
                       y_trend=trend)


def rho_increment(V, u1: float, u2: float, y_sequence: Sequence[float] = DEFAULT_Y_SEQUENCE,
                  points: int = 33) -> Dict[str, float]:
    """Increments of rho, rho11, rho12, rho22 over (u1, u2)."""
    if not 0 < u1 < u2:
        raise ValueError(f"Need 0 < u1 < u2, got ({u1}, {u2})")
    grid = stieltjes_measure(V, [u1, u2], y_sequence, points)
    return {"drho": float(grid.drho[0]), "drho11": float(grid.drho11[0]), "drho12": float(grid.drho12[0]),
            "drho22": float(grid.drho22[0])}


def _bracket_eigenvalues(V, L: float, lo: float, hi: float, grid_points: int):
    lams = np.linspace(lo, hi, grid_points)
    counts = np.floor(rotation_angle(V, lams, L) / np.pi)
    for _ in range(40):
        steps = np.diff(counts)
        crowded = np.nonzero(steps > 1)[0]
        if crowded.size == 0:
            break
        extra = 0.5 * (lams[crowded] + lams[crowded + 1])
        extra_counts = np.floor(rotation_angle(V, extra, L) / np.pi)
        lams = np.concatenate([lams, extra])
        counts = np.concatenate([counts, extra_counts])
        order = np.argsort(lams)
        lams, counts = lams[order], counts[order]
    else:
        raise MissedEigenvalueError("Could not separate eigenvalues by bisection of the rotation count")
    single = np.nonzero(np.diff(counts) == 1)[0]
    return lams[single], lams[single + 1], counts[single + 1], counts[0], counts[-1]


def _locate(V, L: float, a: np.ndarray, b: np.ndarray, n: np.ndarray, tol: float = 1e-12, iterations: int = 60):
    """Illinois regula falsi on angle(L, lambda) = n pi, for all brackets at once."""
    fa = rotation_angle(V, a, L) - n * np.pi
    fb = rotation_angle(V, b, L) - n * np.pi
    c = np.where(fb == 0, b, 0.5 * (a + b))
    done = fb == 0
    side = np.zeros_like(a)
    for _ in range(iterations):
        if np.all(done):
            break
        spread = fb - fa
        trial = np.where(spread > 0, b - fb * (b - a) / np.where(spread > 0, spread, 1.0), 0.5 * (a + b))
        c = np.where(done, c, trial)
        fc = rotation_angle(V, c, L) - n * np.pi
        done |= (np.abs(fc) < 1e-11) | (b - a < tol * np.maximum(1.0, np.abs(c)))
        upper = fc >= 0
        # same end replaced twice in a row: halve the stale end
        fa = np.where(upper & (side > 0), fa / 2.0, fa)
        fb = np.where(~upper & (side < 0), fb / 2.0, fb)
        a, fa = np.where(upper | done, a, c), np.where(upper | done, fa, fc)
        b, fb = np.where(upper & ~done, c, b), np.where(upper & ~done, fc, fb)
        side = np.where(upper, 1.0, -1.0)
    return c


def truncated_spectral_function(V, L: float = 200.0, lambda_max: Optional[float] = None,
                                lambda_min: Optional[float] = None, edges=None, cells: int = 400,
                                grid_points: Optional[int] = None) -> MeasureGrid:
    """
    Spectral function of the Dirichlet problem on (0, L): jumps 1/||u_n||^2 at its eigenvalues.

    Eigenvalues are bracketed by the rotation count of the scaled Pruefer angle and refined by
    regula falsi. Cell increments follow the cumulative jumps, linearly interpolated between the
    midpoints of consecutive eigenvalues.
    """
    nu = float(V.nu)
    tau2 = V.tau**2
    if edges is not None:
        edges = np.asarray(edges, dtype=float)
        lo, hi = float(edges[0]), float(edges[-1])
    else:
        lo = 0.5 * tau2 if lambda_min is None else lambda_min
        hi = tau2 + 4.0 if lambda_max is None else lambda_max
        edges = np.linspace(lo, hi, cells + 1)
    if lo <= 0:
        raise ValueError("Truncated spectral function needs lambda_min > 0")
    if grid_points is None:
        grid_points = max(400, int(4.0 * L * math.sqrt(hi) / np.pi))

    a, b, n, count_lo, count_hi = _bracket_eigenvalues(V, L, lo, hi, grid_points)
    eigenvalues = _locate(V, L, a, b, n) if a.size else np.empty(0)
    expected = int(count_hi - count_lo)
    if eigenvalues.size != expected:
        raise MissedEigenvalueError(f"Located {eigenvalues.size} eigenvalues in [{lo:g}, {hi:g}] but the rotation "
                                    f"count says {expected}")
    logger.info(f"Truncated problem on (0, {L:g}): {expected} eigenvalues in [{lo:g}, {hi:g}]")

    if eigenvalues.size:
        _, _, norm = regular_solution_grid(V, eigenvalues, [L], with_norm=True)
        jumps = 1.0 / norm[:, 0]
        u1, up1 = bessel_seed(nu, eigenvalues, 1.0)
    else:
        jumps = u1 = up1 = np.empty(0)

    increments = {}
    for name, weights in (("drho", jumps), ("drho11", jumps * u1**2), ("drho12", jumps * u1 * up1),
                          ("drho22", jumps * up1**2)):
        increments[name] = _cell_increments(edges, eigenvalues, weights)
    return MeasureGrid(edges, increments["drho"], increments["drho11"], increments["drho12"], increments["drho22"],
                       "truncated", eigenvalues, jumps)


def _cell_increments(edges: np.ndarray, eigenvalues: np.ndarray, jumps: np.ndarray) -> np.ndarray:
    if eigenvalues.size == 0:
        return np.zeros(len(edges) - 1)
    if eigenvalues.size == 1:
        knots = np.array([eigenvalues[0] - 1e-9, eigenvalues[0] + 1e-9])
    else:
        mids = 0.5 * (eigenvalues[1:] + eigenvalues[:-1])
        knots = np.concatenate([[eigenvalues[0] - (mids[0] - eigenvalues[0])], mids,
                                [eigenvalues[-1] + (eigenvalues[-1] - mids[-1])]])
    cumulative = np.concatenate([[0.0], np.cumsum(jumps)])
    return np.diff(np.interp(edges, knots, cumulative))


def _support_grid(f: Callable, V, support: Tuple[float, float], points: int) -> np.ndarray:
    lo, hi = support
    if lo < 0 or hi <= lo or hi > V.r_max:
        raise SupportError(f"Support [{lo}, {hi}] must lie inside (0, {V.r_max:g}]")
    beyond = np.abs(f(np.linspace(hi, hi + 1.0, 11)[1:]))
    if np.any(beyond > 1e-12):
        raise SupportError(f"Function does not vanish beyond r={hi}")
    return np.linspace(max(lo, 1e-9), hi, points)


def _solutions_on(V, lams: np.ndarray, r: np.ndarray) -> np.ndarray:
    u = np.empty((lams.size, r.size))
    inner = r < R_START
    if np.any(inner):
        u[:, inner] = bessel_seed(float(V.nu), lams[:, None], r[inner][None, :])[0]
    if np.any(~inner):
        u[:, ~inner] = regular_solution_grid(V, lams, r[~inner])[0]
    return u


def bump(center: float, radius: float) -> Callable:
    """exp(-1/(1-x^2)) on |x| < 1 with x = (r - center)/radius, zero outside."""

    def f(r):
        x = (np.asarray(r, dtype=float) - center) / radius
        inside = np.abs(x) < 1
        safe = np.where(inside, x, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - safe**2)), 0.0)

    return f


def generalized_fourier(f: Callable, measure: MeasureGrid, V, support: Tuple[float, float],
                        points: int = 2001) -> np.ndarray:
    """f^(lambda) = integral of f(r) sqrt(r) J~(r, lambda) dr at the cell midpoints."""
    r = _support_grid(f, V, support, points)
    u = _solutions_on(V, measure.midpoints, r)
    return simpson(f(r)[None, :] * u, x=r, axis=1)


def inverse_fourier(coefficients: np.ndarray, measure: MeasureGrid, V, r) -> np.ndarray:
    """Reconstruction f(r) = sum over cells of f^ u(r, lambda) d rho."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    u = _solutions_on(V, measure.midpoints, r)
    return (coefficients * measure.drho) @ u


def parseval(f: Callable, measure: MeasureGrid, V, support: Tuple[float, float],
             points: int = 2001) -> Dict[str, float]:
    r = _support_grid(f, V, support, points)
    norm = float(simpson(f(r) ** 2, x=r))
    coefficients = generalized_fourier(f, measure, V, support, points)
    transformed = float(np.sum(coefficients**2 * measure.drho))
    return {"norm": norm, "transform_norm": transformed, "relative_error": abs(transformed - norm) / norm}


def multiplication_defect(f: Callable, f_second: Callable, measure: MeasureGrid, V,
                          support: Tuple[float, float], points: int = 2001) -> float:
    """Relative L2(d rho) distance between the transform of -f'' + V f and lambda times the transform of f."""
    g = lambda r: -f_second(r) + np.asarray(V(r), dtype=float) * f(r)
    fhat = generalized_fourier(f, measure, V, support, points)
    ghat = generalized_fourier(g, measure, V, support, points)
    target = measure.midpoints * fhat
    return float(math.sqrt(np.sum((ghat - target) ** 2 * measure.drho) / np.sum(target**2 * measure.drho)))


def export_m_functions(samples: Sequence[MFunctionSample], path: str, config_hash: Optional[str] = None) -> None:
    write_csv(path, {
        "z_re": [s.z.real for s in samples],
        "z_im": [s.z.imag for s in samples],
        "m_minus_re": [s.m_minus.real for s in samples],
        "m_minus_im": [s.m_minus.imag for s in samples],
        "m_plus_re": [s.m_plus.real for s in samples],
        "m_plus_im": [s.m_plus.imag for s in samples],
        "error": [s.error for s in samples],
    }, config_hash)

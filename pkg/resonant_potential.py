"""
Smooth potentials V(r) on (0, inf) that agree with a given core below b - delta, pass a
bridge on [b - delta, b + delta] and carry a resonant tail with |V - tau^2| <= h(r)/(1+r).

The tail is built piece by piece on [b_j, b_{j+1}), b_{j+1} = growth * b_j. In "locked" mode every
target term follows the modified Pruefer angle of the regular solution at its momentum, solved
together with the potential from r = 1, so the regular solution is the one pushed to decay.
"""
import bisect
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.stats import qmc

from config import DEFAULT_SEED, R_MAX
from schrodinger import bessel_seed
from utils import read_csv, smooth_step, write_csv, write_json

logger = logging.getLogger(__name__)

MOLLIFIER_ORDER = 4
_PHASE_RTOL = 1e-8
_PHASE_ATOL = 1e-10


class EnvelopeViolation(ValueError):
    """Raised when a schedule cannot keep |V - tau^2| below h(r)/(1+r)."""


@dataclass(frozen=True)
class Piece:
    start: float
    end: float
    targets: Tuple[float, ...]
    weights: Tuple[float, ...]
    amplitude: float
    phases: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"Piece interval must be non-empty, got [{self.start}, {self.end})")
        if len(self.weights) != len(self.targets):
            raise ValueError("Piece needs one weight per target momentum")
        if self.phases and len(self.phases) != len(self.targets):
            raise ValueError("Piece needs one phase per target momentum")
        if self.amplitude < 0:
            raise ValueError(f"Piece amplitude must be non-negative, got {self.amplitude}")
        if any(k <= 0 for k in self.targets):
            raise ValueError("Target momenta must be positive")

    @property
    def phase_offsets(self) -> Tuple[float, ...]:
        return self.phases or (0.0,) * len(self.targets)

    def envelope_load(self) -> float:
        """c_j * |S_j| * max weight."""
        if not self.targets:
            return 0.0
        return self.amplitude * len(self.targets) * max(abs(w) for w in self.weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "start": self.start,
            "end": self.end,
            "targets": list(self.targets),
            "weights": list(self.weights),
            "amplitude": self.amplitude,
            "phases": list(self.phase_offsets),
        }


@dataclass(frozen=True)
class PotentialSpec:
    tau: float
    nu: float
    h: Callable
    b: float = 10.0
    delta: float = 0.1
    schedule: Tuple[Piece, ...] = ()
    width: float = 0.5
    mollifier_order: int = MOLLIFIER_ORDER
    seed: int = DEFAULT_SEED
    mode: str = "locked"
    r_max: float = R_MAX
    max_step: float = 0.1
    envelope: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.b < 10:
            raise ValueError(f"b must be >= 10, got {self.b}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta must satisfy 0<delta<1/2, got {self.delta}")
        if self.mollifier_order < MOLLIFIER_ORDER:
            raise ValueError(f"Mollifier order must be >= {MOLLIFIER_ORDER}")
        if self.mode not in ("locked", "free"):
            raise ValueError(f"Unknown schedule mode {self.mode!r}")
        if self.schedule and self.schedule[0].start < self.b + self.delta - 1e-12:
            raise ValueError("The first piece must start at or beyond b + delta")
        for left, right in zip(self.schedule, self.schedule[1:]):
            if left.end != right.start:
                raise ValueError(f"Pieces must tile the tail, gap at r={left.end}")
            if right.start < 2.0 * left.start * (1 - 1e-12):
                raise ValueError(f"Piece lengths must grow by a factor >= 2 (at r={right.start})")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": self.tau,
            "nu": self.nu,
            "b": self.b,
            "delta": self.delta,
            "schedule": [piece.to_dict() for piece in self.schedule],
            "width": self.width,
            "mollifier_order": self.mollifier_order,
            "seed": self.seed,
            "mode": self.mode,
            "r_max": self.r_max,
            "envelope": self.envelope,
        }


@dataclass(frozen=True)
class Potential:
    """Vectorised V(r) with its metadata. `scalar` is an optional fast path for float arguments."""
    evaluate: Callable
    tau: float
    nu: Optional[float] = None
    breakpoints: Tuple[float, ...] = ()
    tilde_boundary: Optional[float] = None
    r_max: float = math.inf
    spec: Optional[PotentialSpec] = None
    certificate: Dict[str, Any] = field(default_factory=dict)
    targets: Tuple[float, ...] = ()
    scalar: Optional[Callable] = None

    def __call__(self, r):
        return self.evaluate(r)

    def at(self, r: float) -> float:
        if self.scalar is not None:
            return self.scalar(r)
        return float(self.evaluate(r))

    def excess(self, r):
        return self.evaluate(r) - self.tau**2

    def derivative(self, r):
        """V'(r) by central differences."""
        r = np.asarray(r, dtype=float)
        step = 1e-5 * np.maximum(1.0, r)
        return (self.evaluate(r + step) - self.evaluate(r - step)) / (2.0 * step)


@dataclass
class ContractReport:
    contracts: Dict[str, Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return all(entry["passed"] for entry in self.contracts.values())

    @property
    def failed(self) -> List[str]:
        return [name for name, entry in self.contracts.items() if not entry["passed"]]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "failed": self.failed, "contracts": self.contracts}


def bessel_core(nu: float) -> Callable:
    """(nu^2 - 1/4)/r^2."""
    coefficient = nu * nu - 0.25

    def core(r):
        r = np.asarray(r, dtype=float)
        out = coefficient / r**2
        return out if out.ndim else float(out)

    return core


def partition_weights(r, breakpoints: Sequence[float], width: float) -> np.ndarray:
    """
    Smooth partition of unity subordinate to the intervals cut by `breakpoints`.

    Row i is the weight of interval i ((-inf, x_0) is row 0). Weights are exactly 0 or 1 outside
    the bands |r - x_i| < width.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    bps = np.asarray(breakpoints, dtype=float)
    weights = np.zeros((len(bps) + 1, r.size))
    weights[np.searchsorted(bps, r, side="right"), np.arange(r.size)] = 1.0
    for i, x in enumerate(bps):
        band = np.abs(r - x) < width
        if np.any(band):
            s = smooth_step((r[band] - x + width) / (2.0 * width))
            weights[:, band] = 0.0
            weights[i, band] = 1.0 - s
            weights[i + 1, band] = s
    return weights


def _scalar_weights(r: float, breakpoints: Sequence[float], width: float):
    i = bisect.bisect_right(breakpoints, r)
    if i > 0 and r - breakpoints[i - 1] < width:
        s = smooth_step((r - breakpoints[i - 1] + width) / (2.0 * width))
        return ((i - 1, 1.0 - s), (i, s))
    if i < len(breakpoints) and breakpoints[i] - r < width:
        s = smooth_step((r - breakpoints[i] + width) / (2.0 * width))
        return ((i, 1.0 - s), (i + 1, s))
    return ((i, 1.0),)


def _check_bands(breakpoints: Sequence[float], width: float) -> None:
    if width <= 0:
        raise ValueError(f"Mollifier width must be positive, got {width}")
    gaps = np.diff(np.asarray(breakpoints, dtype=float))
    if np.any(gaps <= 2.0 * width):
        raise ValueError(f"Mollifier neighborhoods of width {width} overlap (minimal gap {gaps.min():.6g})")


def band_width(starts: Sequence[float], width: float) -> float:
    """Mollifier half-width: the requested width, at most a quarter of the smallest gap."""
    if len(starts) < 2:
        return width
    return min(width, float(np.min(np.diff(starts))) / 4.0)


def mollify(pieces: Sequence[Callable], breakpoints: Sequence[float], width: float,
            order: int = MOLLIFIER_ORDER) -> Callable:
    """
    Join piecewise definitions into one C-infinity function.

    Args:
        pieces: len(breakpoints)+1 vectorised functions, piece i valid on [x_{i-1}, x_i)
        breakpoints: increasing breakpoints x_i
        width: half-width of the blending band around each breakpoint
        order: smoothness order the caller relies on (the blend is C-infinity)

    Returns:
        Vectorised function equal to the pieces outside the bands and a convex blend inside them
    """
    if len(pieces) != len(breakpoints) + 1:
        raise ValueError("mollify needs exactly one more piece than breakpoints")
    if order < MOLLIFIER_ORDER:
        raise ValueError(f"Mollifier order must be >= {MOLLIFIER_ORDER}, got {order}")
    _check_bands(breakpoints, width)

    def smoothed(r):
        arr = np.asarray(r, dtype=float)
        flat = np.atleast_1d(arr)
        weights = partition_weights(flat, breakpoints, width)
        out = np.zeros_like(flat)
        for g, w in zip(pieces, weights):
            full = w == 1.0
            if np.any(full):
                out[full] = g(flat[full])
            part = (w > 0.0) & ~full
            if np.any(part):
                out[part] += w[part] * g(flat[part])
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    return smoothed


class _ResonantTail:
    """Excess V - tau^2 of a piecewise resonant schedule."""

    def __init__(self, pieces: Sequence[Piece], width: float, mode: str):
        self.pieces = tuple(pieces)
        self.starts = [p.start for p in self.pieces]
        self.width = width
        self.mode = mode
        self.k_bars = np.array(sorted({k for p in self.pieces for k in p.targets}), dtype=float)
        self._slots = [np.searchsorted(self.k_bars, p.targets) for p in self.pieces]
        self._weights = [np.asarray(p.weights, dtype=float) for p in self.pieces]
        self._phases = [np.asarray(p.phase_offsets, dtype=float)[:, None] for p in self.pieces]
        if self.starts:
            _check_bands(self.starts, width)

    def _piece(self, j: int, r: np.ndarray, thetas: Optional[np.ndarray]) -> np.ndarray:
        slots = self._slots[j]
        if self.mode == "locked":
            osc = -np.sin(2.0 * thetas[slots] + self._phases[j])
        else:
            osc = np.sin(2.0 * self.k_bars[slots][:, None] * r + self._phases[j])
        return self.pieces[j].amplitude / (1.0 + r) * (self._weights[j] @ osc)

    def excess(self, r, thetas: Optional[np.ndarray] = None) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        if not self.pieces:
            return out
        weights = partition_weights(r, self.starts, self.width)
        for j in range(len(self.pieces)):
            w = weights[j + 1]
            active = w > 0.0
            if np.any(active):
                local = thetas[:, active] if thetas is not None else None
                out[active] += w[active] * self._piece(j, r[active], local)
        return out

    def excess_scalar(self, r: float, thetas: Optional[np.ndarray] = None) -> float:
        if not self.pieces:
            return 0.0
        total = 0.0
        point = np.array([r])
        local = thetas[:, None] if thetas is not None else None
        for i, w in _scalar_weights(r, self.starts, self.width):
            if i > 0 and w > 0.0:
                total += w * float(self._piece(i - 1, point, local)[0])
        return total


def _lock_phases(core: Callable, tau: float, nu: float, join: float, width: float,
                 tail: _ResonantTail, r_max: float, max_step: float):
    """Solve the target Pruefer angles together with the potential they define."""
    tau2 = tau * tau
    k_bars = tail.k_bars
    u, up = bessel_seed(nu, tau2 + k_bars**2, 1.0)
    theta0 = np.arctan2(k_bars * u, up)

    def rhs(r, theta):
        if r <= join - width:
            x = float(core(r)) - tau2
        else:
            x = tail.excess_scalar(r, theta)
            if r < join + width:
                s = smooth_step((r - join + width) / (2.0 * width))
                x = (1.0 - s) * (float(core(r)) - tau2) + s * x
        return k_bars - x * np.sin(theta) ** 2 / k_bars

    step = min(max_step, 0.2 / float(k_bars.max()))
    sol = solve_ivp(rhs, (1.0, r_max), theta0, method="RK45", rtol=_PHASE_RTOL, atol=_PHASE_ATOL,
                    max_step=step, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"Phase locking failed at r={sol.t[-1]:.6g}: {sol.message}")
    logger.info(f"Locked {len(k_bars)} target phases on [1, {r_max:g}] in {sol.t.size} steps")
    return sol.sol


def _assemble(core: Callable, tau: float, nu: float, join: float, width: float,
              tail: _ResonantTail, r_max: float, max_step: float):
    tau2 = tau * tau
    theta_of = None
    if tail.mode == "locked" and tail.pieces:
        theta_of = _lock_phases(core, tau, nu, join, width, tail, r_max, max_step)

    def tail_value(r):
        thetas = theta_of(r) if theta_of is not None else None
        return tau2 + tail.excess(r, thetas)

    smoothed = mollify([core, tail_value], [join], width)

    def evaluate(r):
        if theta_of is not None and np.any(np.asarray(r) > r_max):
            raise ValueError(f"Locked potential is only defined up to r_max={r_max:g}")
        return smoothed(r)

    def scalar(r: float) -> float:
        if r <= join - width:
            return float(core(r))
        if theta_of is not None and r > r_max:
            raise ValueError(f"Locked potential is only defined up to r_max={r_max:g}")
        value = tau2 + tail.excess_scalar(r, theta_of(r) if theta_of is not None else None)
        if r >= join + width:
            return value
        s = smooth_step((r - join + width) / (2.0 * width))
        return (1.0 - s) * float(core(r)) + s * value

    return evaluate, scalar


def envelope_certificate(potential: Potential, h: Callable, r_lo: float, r_hi: float,
                         count: int = 2000) -> Dict[str, Any]:
    r = np.geomspace(r_lo, r_hi, count)
    ratio = np.abs(potential.excess(r)) * (1.0 + r) / h(r)
    worst = int(np.argmax(ratio))
    return {"samples": count, "max_ratio": float(ratio[worst]), "worst_r": float(r[worst])}


def dyadic_schedule(h: Callable, start: float, r_max: float, k_bar_min: float = 1.0,
                    k_bar_max: float = 2.0, max_level: int = 1, growth: float = 2.0,
                    width: float = 0.5, amplitudes: Optional[Sequence[float]] = None,
                    random_phases: bool = False, seed: int = DEFAULT_SEED) -> Tuple[Piece, ...]:
    """
    Geometric pieces b_j = start * growth^j up to r_max, targeting the level-j dyadic midpoints
    of [k_bar_min, k_bar_max] (level capped at max_level) with uniform weights.

    Amplitudes default to c_j = min(h(b_j - width), j + 1); explicit `amplitudes` override them
    (the last value repeats).
    """
    if growth < 2:
        raise ValueError(f"Schedule growth must be >= 2, got {growth}")
    if not 0 < k_bar_min < k_bar_max:
        raise ValueError(f"Need 0 < k_bar_min < k_bar_max, got [{k_bar_min}, {k_bar_max}]")
    starts = [float(start)]
    while starts[-1] * growth < r_max:
        starts.append(starts[-1] * growth)
    wd = band_width(starts, width)
    rng = np.random.Generator(np.random.Philox(seed)) if random_phases else None
    pieces = []
    for j, b_j in enumerate(starts):
        level = min(j, max_level)
        count = 2**level
        targets = tuple(k_bar_min + (k_bar_max - k_bar_min) * (2 * m + 1) / 2 ** (level + 1) for m in range(count))
        if amplitudes is not None:
            amplitude = float(amplitudes[min(j, len(amplitudes) - 1)])
        else:
            amplitude = min(float(h(b_j - wd)), j + 1.0)
        phases = tuple(float(p) for p in rng.uniform(0.0, 2.0 * np.pi, count)) if rng is not None else ()
        end = starts[j + 1] if j + 1 < len(starts) else math.inf
        pieces.append(Piece(b_j, end, targets, (1.0 / count,) * count, amplitude, phases))
    logger.debug(f"Dyadic schedule: {len(pieces)} pieces from r={start:g}, width={wd:g}")
    return tuple(pieces)


def _check_envelope(spec: PotentialSpec, width: float) -> None:
    for j, piece in enumerate(spec.schedule):
        r_low = piece.start - width
        bound = float(spec.h(r_low))
        load = piece.envelope_load()
        if load > bound * (1.0 + 1e-12):
            raise EnvelopeViolation(
                f"Contract II violated by piece {j}: amplitude load {load:.6g} exceeds h={bound:.6g} at r={r_low:.6g}"
            )


def build_potential(tilde_V: Callable, spec: PotentialSpec) -> Potential:
    """
    Build V from the core potential and the resonant schedule.

    Args:
        tilde_V: core potential on (0, b], equal to (nu^2-1/4)/r^2 on (0,1]
        spec: potential specification

    Returns:
        Potential with V = tilde_V on (0, b-delta] and an envelope certificate
    """
    width = band_width([p.start for p in spec.schedule], spec.width)
    _check_envelope(spec, width)
    tail = _ResonantTail(spec.schedule, width, spec.mode)
    evaluate, scalar = _assemble(tilde_V, spec.tau, spec.nu, spec.b, spec.delta, tail, spec.r_max, spec.max_step)
    potential = Potential(
        evaluate=evaluate,
        tau=spec.tau,
        nu=spec.nu,
        tilde_boundary=spec.b - spec.delta,
        r_max=spec.r_max,
        spec=spec,
        targets=tuple(float(k) for k in tail.k_bars),
        scalar=scalar,
    )
    certificate = envelope_certificate(potential, spec.h, spec.b + spec.delta, spec.r_max)
    logger.info(f"Built {spec.mode} potential with {len(spec.schedule)} pieces, "
                f"max |V-tau^2|(1+r)/h = {certificate['max_ratio']:.4g}")
    return dataclasses.replace(potential, certificate=certificate)


def wigner_von_neumann(c: float, k_bar0: float, tau: float, r0: float = 2.0, nu: float = 1.5) -> Potential:
    """
    Bessel core on (0,1], tau^2 + c sin(2 k_bar0 r)/r for r >= r0, blended to tau^2 just below r0.
    """
    if c < 0 or k_bar0 <= 0 or r0 < 1:
        raise ValueError(f"Need c >= 0, k_bar0 > 0, r0 >= 1; got c={c}, k_bar0={k_bar0}, r0={r0}")
    tau2 = tau * tau
    core = bessel_core(nu)
    oscillating = lambda r: tau2 + c * np.sin(2.0 * k_bar0 * r) / r
    width = min(0.5, (r0 - 1.0) / 2.0)
    outer = mollify([lambda r: np.full_like(r, tau2), oscillating], [r0 - width], width) if width > 0 else oscillating

    def evaluate(r):
        arr = np.asarray(r, dtype=float)
        flat = np.atleast_1d(arr)
        out = np.empty_like(flat)
        inner = flat <= 1.0
        if np.any(inner):
            out[inner] = core(flat[inner])
        if np.any(~inner):
            out[~inner] = outer(flat[~inner])
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    def scalar(r: float) -> float:
        if r >= r0:
            return tau2 + c * math.sin(2.0 * k_bar0 * r) / r
        return float(evaluate(r))

    return Potential(evaluate=evaluate, tau=tau, nu=nu, breakpoints=(1.0,), targets=(k_bar0,), scalar=scalar)


def embedded_eigenvalue_potential(nu: float, tau: float, k_bar0: float, c: float, r_max: float = 400.0,
                                  max_step: float = 0.1) -> Potential:
    """
    Bessel core on (0,1], joined to tau^2 on [1,2], then a phase-locked term -c sin(2 theta)/(1+r)
    ramped in over [2,3].

    The regular solution at lambda0 = tau^2 + k_bar0^2 behaves like r^(-c/(4 k_bar0)), so lambda0 is an
    embedded eigenvalue once c > 2 k_bar0.
    """
    piece = Piece(2.5, math.inf, (k_bar0,), (1.0,), c)
    tail = _ResonantTail((piece,), 0.5, "locked")
    evaluate, scalar = _assemble(bessel_core(nu), tau, nu, 1.5, 0.5, tail, r_max, max_step)
    logger.info(f"Embedded eigenvalue potential at lambda0={tau * tau + k_bar0 * k_bar0:.6g} (c={c}, k_bar0={k_bar0})")
    return Potential(evaluate=evaluate, tau=tau, nu=nu, r_max=r_max, targets=(k_bar0,), scalar=scalar)


def free_potential(nu: float, tau: float) -> Potential:
    """Bessel core on (0,1] and tau^2 beyond."""
    core = bessel_core(nu)
    tau2 = tau * tau

    def evaluate(r):
        arr = np.asarray(r, dtype=float)
        out = np.where(arr <= 1.0, core(np.maximum(arr, 1e-300)), tau2)
        return out if out.ndim else float(out)

    return Potential(evaluate=evaluate, tau=tau, nu=nu, breakpoints=(1.0,))


def constant_potential(value: float, nu: Optional[float] = None, tau: Optional[float] = None) -> Potential:
    def evaluate(r):
        out = np.full(np.shape(r), float(value))
        return out if out.ndim else float(out)

    return Potential(evaluate=evaluate, tau=math.sqrt(max(value, 0.0)) if tau is None else tau, nu=nu)


def _sidecar(path: str) -> str:
    return os.path.splitext(path)[0] + ".json"


def write_potential(potential: Potential, path: str, r_grid, config_hash: Optional[str] = None) -> None:
    """Write (r, V) samples as CSV and the reproduction data as a JSON sidecar."""
    r = np.asarray(r_grid, dtype=float)
    write_csv(path, {"r": r, "V": potential(r)}, config_hash)
    meta = {
        "tau": potential.tau,
        "nu": potential.nu,
        "breakpoints": list(potential.breakpoints),
        "targets": list(potential.targets),
        "spec": potential.spec.to_dict() if potential.spec is not None else None,
        "certificate": potential.certificate,
    }
    write_json(_sidecar(path), meta, config_hash)


def read_potential(path: str) -> Potential:
    """Load a potential written by write_potential; values between samples come from a cubic spline."""
    frame = read_csv(path)
    r = frame["r"].to_numpy(dtype=float)
    spline = CubicSpline(r, frame["V"].to_numpy(dtype=float), extrapolate=False)
    meta: Dict[str, Any] = {}
    if os.path.exists(_sidecar(path)):
        with open(_sidecar(path), "r", encoding="utf-8") as handle:
            meta = json.load(handle)

    def evaluate(x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < r[0]) or np.any(arr > r[-1]):
            raise ValueError(f"Imported potential covers [{r[0]:g}, {r[-1]:g}] only")
        out = spline(arr)
        return out if np.ndim(out) else float(out)

    logger.info(f"Loaded potential samples from {path}")
    return Potential(
        evaluate=evaluate,
        tau=float(meta.get("tau", 0.0)),
        nu=meta.get("nu"),
        breakpoints=tuple(meta.get("breakpoints", ())),
        r_max=float(r[-1]),
        targets=tuple(meta.get("targets", ())),
        certificate={"source": path},
    )


def verify_contract(potential: Potential, tilde_V: Callable, spec: PotentialSpec,
                    samples: int = 10**6, grid_points: int = 4001) -> ContractReport:
    """
    Check contracts I-III of the construction.

    I: V == tilde_V bit for bit on (0, b-delta].
    II: |V - tau^2| (1+r)/h(r) <= 1 on quasirandom samples of [b+delta, r_max].
    III: sup over [b-delta, b+delta] of |V| <= tau^2 + 1 + sup over [b-1, b] of |tilde_V|.
    """
    b, delta, tau2 = spec.b, spec.delta, spec.tau**2
    contracts: Dict[str, Dict[str, Any]] = {}

    r = np.linspace(0.0, b - delta, grid_points)[1:]
    v, t = potential(r), tilde_V(r)
    mismatch = v != t
    contracts["I"] = {
        "passed": not bool(np.any(mismatch)),
        "margin": float(np.max(np.abs(v - t))),
        "violations": r[mismatch][:10].tolist(),
    }

    lo, hi = b + delta, min(potential.r_max, spec.r_max)
    points = qmc.Halton(d=1, scramble=False).random(samples)[:, 0]
    worst_ratio, worst_r, bad = 0.0, lo, []
    for chunk in np.array_split(lo + (hi - lo) * points, max(1, samples // 100000)):
        ratio = np.abs(potential(chunk) - tau2) * (1.0 + chunk) / spec.h(chunk)
        k = int(np.argmax(ratio))
        if ratio[k] > worst_ratio:
            worst_ratio, worst_r = float(ratio[k]), float(chunk[k])
        bad.extend(chunk[ratio > 1.0][:10].tolist())
    contracts["II"] = {
        "passed": worst_ratio <= 1.0,
        "margin": 1.0 - worst_ratio,
        "worst_r": worst_r,
        "violations": sorted(bad)[:10],
    }

    bridge = np.linspace(b - delta, b + delta, grid_points)
    sup_v = float(np.max(np.abs(potential(bridge))))
    bound = tau2 + 1.0 + float(np.max(np.abs(tilde_V(np.linspace(b - 1.0, b, 1001)))))
    contracts["III"] = {
        "passed": sup_v <= bound,
        "margin": bound - sup_v,
        "violations": [] if sup_v <= bound else bridge[np.abs(potential(bridge)) > bound][:10].tolist(),
    }

    report = ContractReport(contracts)
    if report.passed:
        logger.info(f"Contracts I-III hold (II margin {contracts['II']['margin']:.4g})")
    else:
        logger.warning(f"Contract check failed: {report.failed}")
    return report

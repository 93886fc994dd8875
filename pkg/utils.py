import json
import logging
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from config import MAX_ENVELOPE_ALPHA

logger = logging.getLogger(__name__)

Envelope = Callable[[Any], Any]


def _sigma(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)


def smooth_step(x):
    """C-infinity transition: 0 for x <= 0, 1 for x >= 1, sigma(x)/(sigma(x)+sigma(1-x)) between."""
    x = np.asarray(x, dtype=float)
    a = _sigma(x)
    b = _sigma(1.0 - x)
    s = a / (a + b)
    return s if s.ndim else float(s)


def smooth_step_derivatives(x):
    """Return (s, s', s'') of smooth_step with respect to x."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.where(x >= 1.0, 1.0, 0.0)
    ds = np.zeros_like(x)
    d2s = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    if np.any(inside):
        t = x[inside]
        u = 1.0 - t
        a, b = np.exp(-1.0 / t), np.exp(-1.0 / u)
        a1, b1 = a / t**2, -b / u**2
        a2 = a * (1.0 / t**4 - 2.0 / t**3)
        b2 = b * (1.0 / u**4 - 2.0 / u**3)
        d = a + b
        d1 = a1 + b1
        d2 = a2 + b2
        num1 = a1 * d - a * d1
        s[inside] = a / d
        ds[inside] = num1 / d**2
        d2s[inside] = (a2 * d - a * d2) / d**2 - 2.0 * d1 * num1 / d**3
    if scalar:
        return float(s[0]), float(ds[0]), float(d2s[0])
    return s, ds, d2s


def normalize_envelope(h: Envelope) -> Envelope:
    """
    Clamp an envelope to the standing normalization: at least h(1), at most 1 + r^(1/10).

    Args:
        h: positive, non-decreasing function tending to infinity

    Returns:
        Vectorised normalized envelope
    """
    floor = float(h(1.0))

    def normalized(r):
        r = np.asarray(r, dtype=float)
        out = np.minimum(np.maximum(h(r), floor), 1.0 + r ** MAX_ENVELOPE_ALPHA)
        return out if out.ndim else float(out)

    return normalized


def make_envelope(descriptor: Dict[str, Any]) -> Envelope:
    """
    Build a normalized envelope from a config descriptor.

    Families: "log" -> 1+log(1+r), "pow" -> 1+r^alpha (alpha <= 1/10), "custom" -> monotone table.
    """
    family = descriptor.get("family", "log")
    if family == "log":
        raw = lambda r: 1.0 + np.log1p(r)
    elif family == "pow":
        alpha = float(descriptor.get("alpha", MAX_ENVELOPE_ALPHA))
        if alpha > MAX_ENVELOPE_ALPHA:
            raise ValueError(f"Envelope exponent {alpha} exceeds the normalization h(r) <= 1 + r^(1/10)")
        raw = lambda r: 1.0 + np.asarray(r, dtype=float) ** alpha
    elif family == "custom":
        table = np.asarray(descriptor["table"], dtype=float)
        rs = table[:, 0]
        hs = np.maximum.accumulate(table[:, 1])
        # beyond the table the envelope keeps growing like the normalization bound
        raw = lambda r: np.where(
            np.asarray(r) <= rs[-1],
            np.interp(r, rs, hs),
            hs[-1] + np.asarray(r, dtype=float) ** MAX_ENVELOPE_ALPHA - rs[-1] ** MAX_ENVELOPE_ALPHA,
        )
    else:
        raise ValueError(f"Unknown envelope family {family!r}")
    return normalize_envelope(raw)


def write_csv(path: str, columns: Dict[str, Sequence], config_hash: Optional[str] = None) -> None:
    """Write columns to an RFC-4180 CSV preceded by a '# config_hash=...' line."""
    frame = pd.DataFrame({name: np.asarray(values) for name, values in columns.items()})
    with open(path, "w", encoding="utf-8", newline="") as handle:
        if config_hash:
            handle.write(f"# config_hash={config_hash}\n")
        frame.to_csv(handle, index=False, float_format="%.15g", lineterminator="\r\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_json(path: str, payload: Dict[str, Any], config_hash: Optional[str] = None) -> None:
    data = dict(payload)
    if config_hash:
        data["config_hash"] = config_hash
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_jsonable(data), handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
    logger.info(f"Wrote report {path}")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else str(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def parse_grid(text: str):
    """Parse 'lo:hi:n' into (lo, hi, n)."""
    try:
        lo, hi, count = text.split(":")
        return float(lo), float(hi), int(count)
    except Exception:
        raise ValueError(f"Grid must look like lo:hi:n, got {text!r}")

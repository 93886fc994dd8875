import os
import json
import hashlib
import logging
from dataclasses import dataclass, field, asdict, fields
from typing import Any, Dict, Optional
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Logging setup
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
logger = logging.getLogger(__name__)

# ODE solver defaults
SOLVER_RTOL = float(os.getenv("SOLVER_RTOL", "1e-10"))
SOLVER_ATOL = float(os.getenv("SOLVER_ATOL", "1e-12"))
R_MAX = float(os.getenv("R_MAX", "1e4"))

# Bessel evaluation
BESSEL_SERIES_TERMS = int(os.getenv("BESSEL_SERIES_TERMS", "80"))
BESSEL_SWITCH_RADIUS = float(os.getenv("BESSEL_SWITCH_RADIUS", "15"))
BESSEL_TOLERANCE = float(os.getenv("BESSEL_TOLERANCE", "1e-10"))

# Reproducibility and outputs
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "0"))
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "out")

# Largest envelope exponent allowed by the normalization h(r) <= 1 + r^(1/10)
MAX_ENVELOPE_ALPHA = 0.1


class ConfigError(ValueError):
    """Raised when a run configuration violates a module invariant."""


@dataclass
class RunConfig:
    """
    Single JSON document describing one reproducible run.

    Top-level keys are exactly the dataclass fields; unknown keys are rejected.
    """
    n: int = 3
    K0: float = -1.0
    b: float = 10.0
    delta: float = 0.1
    mode: Any = "auto"
    envelope: Dict[str, Any] = field(default_factory=lambda: {"family": "log"})
    schedule: Dict[str, Any] = field(default_factory=lambda: {
        "k_bar_min": 1.0,
        "k_bar_max": 2.0,
        "max_level": 1,
        "growth": 2.0,
        "width": 0.5,
        "mode": "locked",
    })
    solver: Dict[str, Any] = field(default_factory=lambda: {
        "rtol": SOLVER_RTOL,
        "atol": SOLVER_ATOL,
        "max_step": 0.1,
    })
    r_max: float = R_MAX
    output_dir: str = OUTPUT_DIR
    seed: int = DEFAULT_SEED

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}")
        config = cls(**data)
        config.validate()
        return config

    @classmethod
    def from_json(cls, path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        data: Dict[str, Any] = {}
        if path:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
            logger.info(f"Loaded run configuration from {path}")
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value
        return cls.from_dict(data)

    def validate(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"Dimension n must be an integer >= 2, got {self.n}")
        if not self.K0 < 0:
            raise ConfigError(f"Curvature K0 must be negative, got {self.K0}")
        if self.b < 10:
            raise ConfigError(f"Join radius b must be >= 10, got {self.b}")
        if not 0 < self.delta < 0.5:
            raise ConfigError(f"Half-width delta must satisfy 0<delta<1/2, got {self.delta}")
        if self.mode != "auto" and (not isinstance(self.mode, int) or self.mode < 0):
            raise ConfigError(f"Mode policy must be 'auto' or a non-negative index, got {self.mode!r}")
        if self.mode != "auto":
            from metric import sphere_mode
            offset = (self.n - 1) * (self.n - 3) / 4.0
            if offset + sphere_mode(int(self.n), self.mode)[0] < 1:
                raise ConfigError(f"Mode i={self.mode} gives nu <= 1 for n={self.n}; pick a larger index or 'auto'")
        family = self.envelope.get("family")
        if family not in ("log", "pow", "custom"):
            raise ConfigError(f"Unknown envelope family {family!r}")
        if family == "pow":
            alpha = float(self.envelope.get("alpha", MAX_ENVELOPE_ALPHA))
            if not 0 < alpha <= MAX_ENVELOPE_ALPHA:
                raise ConfigError(
                    f"Envelope exponent alpha={alpha} exceeds 1/10; envelopes are normalized so that "
                    f"h(r) <= 1 + r^(1/10)"
                )
        if family == "custom" and len(self.envelope.get("table", [])) < 2:
            raise ConfigError("Custom envelope needs a table with at least two (r, h) rows")
        if self.schedule.get("mode", "locked") not in ("locked", "free"):
            raise ConfigError(f"Schedule mode must be 'locked' or 'free', got {self.schedule.get('mode')!r}")
        if float(self.schedule.get("growth", 2.0)) < 2:
            raise ConfigError("Schedule growth factor must be >= 2")
        if self.solver.get("rtol", SOLVER_RTOL) <= 0 or self.solver.get("atol", SOLVER_ATOL) <= 0:
            raise ConfigError("Solver tolerances must be positive")
        if self.r_max < 10 * self.b:
            raise ConfigError(f"r_max={self.r_max} must be at least 10*b")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

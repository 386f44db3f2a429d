"""Run configuration: JSON-mirrored dataclasses with strict validation.

Config files are flat JSON objects whose keys mirror the field names
below; the guidance scale is spelled "lambda" on disk.  Shift fractions
may be numbers or rational strings like "43/128".  Unknown keys are
rejected so typos fail loudly (exit code 2 at the CLI).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from fractions import Fraction

import numpy as np

from . import operators as ops
from .errors import ConfigError

METHODS = ("roger", "zerofill", "cgsense", "l1wavelet", "rograppa")
VARIANTS = ("paper-renoise", "deterministic")
PRIORS = ("shrinkage", "cnn", "gaussian")


def _parse_fraction(value) -> float:
    if isinstance(value, str):
        try:
            return float(Fraction(value))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad shift fraction {value!r}: {exc}") from exc
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigError(f"bad shift fraction {value!r}")


def _build(cls, data: dict, aliases: dict[str, str], required: tuple[str, ...] = ()):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = aliases.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[name] = value
    for name in required:
        if name not in kwargs:
            raise ConfigError(f"missing required config field {name!r}")
    return cls(**kwargs)


@dataclass
class ReconConfig:
    """Everything a reconstruction run needs besides its input arrays."""

    mb: int | None = None  # usually taken from the measurement sidecar
    r: int | None = None
    caipi: list | None = None
    lam: float = 2.0  # JSON key "lambda", the consistency guidance scale
    lfe_size: int = 8
    steps: int = 1000
    seed: int = 0
    method: str = "roger"
    variant: str = "paper-renoise"
    prior: str = "shrinkage"
    weights: str | None = None
    shrink_scale: float = 2.0
    wavelet_levels: int = 3
    T: int = 1000
    beta_0: float = 1e-4
    beta_T: float = 0.02
    lfe_tikhonov: float = 1e-4
    l1_lambda: float = 2e-3
    iters: int = 50
    cg_tol: float = 1e-9

    def __post_init__(self):
        if self.caipi is not None:
            self.caipi = [_parse_fraction(v) for v in self.caipi]
        self.validate()

    def validate(self) -> None:
        if self.mb is not None and self.mb < 1:
            raise ConfigError("MB must be >= 1")
        if self.r is not None and self.r < 1:
            raise ConfigError("R must be >= 1")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.lfe_size < 0:
            raise ConfigError("lfe_size must be >= 0")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.prior not in PRIORS:
            raise ConfigError(f"prior must be one of {PRIORS}, got {self.prior!r}")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if not 0.0 < self.beta_0 <= self.beta_T < 1.0:
            raise ConfigError("betas must satisfy 0 < beta_0 <= beta_T < 1")
        if self.steps > self.T:
            raise ConfigError(f"steps {self.steps} exceed schedule length {self.T}")
        if not -(2**63) <= int(self.seed) < 2**63:
            raise ConfigError("seed must fit in 64 bits")
        if self.caipi is not None and self.mb is not None and len(self.caipi) != self.mb:
            raise ConfigError(f"caipi length {len(self.caipi)} != MB {self.mb}")

    def resolved_caipi(self, mb: int, w: int) -> np.ndarray:
        if self.caipi is not None:
            return ops.validate_caipi(self.caipi, mb)
        return ops.integer_pixel_caipi(mb, w)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ReconConfig":
        return _build(cls, data, aliases={"lambda": "lam"})


@dataclass
class SimulateConfig:
    """Geometry and acquisition settings for one synthetic instance."""

    h: int
    w: int
    c: int = 8
    mb: int = 1
    r: int = 1
    caipi: list | None = None
    acs_width: int = 0
    noise_sigma: float = 0.0
    calib_size: int = 64
    calib_gamma: float = 1.0
    seed: int = 0
    ellipses: list | None = None  # [{center, axes, angle, amplitude}, ...]
    phase_coeffs: list | None = None

    def __post_init__(self):
        if self.caipi is not None:
            self.caipi = [_parse_fraction(v) for v in self.caipi]
        self.validate()

    def validate(self) -> None:
        if self.h < 16 or self.w < 16:
            raise ConfigError("matrix size must be at least 16 (fields 'h', 'w')")
        if self.c < 1:
            raise ConfigError("coil count 'c' must be >= 1")
        if self.mb < 1 or self.r < 1:
            raise ConfigError("'mb' and 'r' must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("'noise_sigma' must be >= 0")
        if self.calib_size > min(self.h, self.w):
            raise ConfigError(
                f"'calib_size' {self.calib_size} exceeds matrix {min(self.h, self.w)}"
            )
        if self.caipi is not None and len(self.caipi) != self.mb:
            raise ConfigError(f"caipi length {len(self.caipi)} != MB {self.mb}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimulateConfig":
        return _build(cls, data, aliases={}, required=("h", "w"))

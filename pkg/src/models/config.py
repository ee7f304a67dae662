import dataclasses
import enum
import logging
import os
from dataclasses import dataclass
from typing import Tuple

from dotenv import dotenv_values, load_dotenv

from src.models.errors import ConfigError
from src.models.models import (
    AttentionMode,
    ErrorReduction,
    LossMode,
    OdeMethod,
    RotationMetric,
)

logger = logging.getLogger(__name__)

ENV_PREFIX = "DIFFORMER_"

# Desk-scale profile for quick end-to-end runs
TINY_PROFILE = {
    "d": 64,
    "points_per_frame": 256,
    "heads": 4,
    "head_dim": 32,
    "att_dim": 256,
    "hks_eigs": 32,
}


@dataclass
class RunConfig:
    seed: int = 0
    points_per_frame: int = 1024
    k: int = 20
    d: int = 256
    heads: int = 4
    head_dim: int = 128
    att_dim: int = 1024
    ode_steps: int = 4
    ode_T: float = 1.0
    ode_method: OdeMethod = OdeMethod.RK4
    hks_eigs: int = 64
    hks_times: int = 16
    topk_fraction: float = 0.75
    lr: float = 1e-4
    epochs: int = 50
    rr_trans_cm: float = 30.0
    rr_rot_deg: float = 1.0
    attention_mode: AttentionMode = AttentionMode.HKS
    feature_diffusion: bool = True
    loss_mode: LossMode = LossMode.TOTAL
    rotation_metric: RotationMetric = RotationMetric.GEODESIC
    error_reduction: ErrorReduction = ErrorReduction.NORM
    noise_sigma: float = 0.0
    frame_extent: Tuple[float, float] = (60.0, 30.0)
    crop_region: Tuple[float, float] = (25.0, 15.0)
    workers: int = 1

    def __post_init__(self):
        self.validate()

    @property
    def backbone_widths(self):
        """EdgeConv widths of the DGCNN backbone; (64, 64, 128, 256) at d=256."""
        return (self.d // 4, self.d // 4, self.d // 2, self.d)

    @property
    def width(self):
        """Attention width, 2d."""
        return 2 * self.d

    def validate(self):
        if self.heads * self.head_dim != 2 * self.d:
            raise ConfigError(f"heads x head_dim must equal 2d: {self.heads} x {self.head_dim} != {2 * self.d}")
        if self.d < 4 or self.d % 4 != 0:
            raise ConfigError(f"d must be a positive multiple of 4, got {self.d}")
        if not 0.0 < self.topk_fraction <= 1.0:
            raise ConfigError(f"topk_fraction must lie in (0, 1], got {self.topk_fraction}")
        if self.ode_steps < 1 or self.ode_T <= 0:
            raise ConfigError(f"ODE integration needs steps >= 1 and T > 0, got {self.ode_steps}, {self.ode_T}")
        if self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.hks_times < 2 or self.hks_eigs < 2:
            raise ConfigError("HKS needs at least two eigenpairs and two time samples")
        if self.points_per_frame <= self.k:
            raise ConfigError(f"points_per_frame ({self.points_per_frame}) must exceed k ({self.k})")
        if self.epochs < 0 or self.lr <= 0:
            raise ConfigError("epochs must be >= 0 and lr > 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if hasattr(value, "value"):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_FIELD_NAMES = {name.lower(): name for name in _FIELD_TYPES}


def _coerce(name, raw):
    kind = _FIELD_TYPES[name]
    text = str(raw).strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == Tuple[float, float]:
            parts = [float(p) for p in text.replace("x", ",").split(",") if p.strip()]
            if len(parts) != 2:
                raise ValueError(text)
            return tuple(parts)
        if isinstance(kind, type) and issubclass(kind, enum.Enum):
            return kind(text.lower())
    except ValueError:
        raise ConfigError(f"Invalid value for {name}: {text!r}") from None
    return text


def _normalise_key(key):
    lowered = key.strip().lower().replace("-", "_")
    return _FIELD_NAMES.get(lowered, lowered)


def load_config(config_path=None, overrides=None, tiny=False, environ=None):
    """Build a RunConfig: defaults < tiny profile < config file < environment < overrides."""
    load_dotenv()
    values = {}
    if tiny:
        values.update(TINY_PROFILE)
    if config_path:
        if not os.path.exists(config_path):
            raise ConfigError(f"Config file not found: {config_path}")
        for key, raw in dotenv_values(config_path).items():
            name = _normalise_key(key)
            if name not in _FIELD_TYPES:
                raise ConfigError(f"Unknown config key {key!r} in {config_path}")
            values[name] = _coerce(name, raw)
    environ = os.environ if environ is None else environ
    for key, raw in environ.items():
        if key.startswith(ENV_PREFIX) and key != f"{ENV_PREFIX}LOG_LEVEL":
            name = _normalise_key(key[len(ENV_PREFIX):])
            if name in _FIELD_TYPES:
                values[name] = _coerce(name, raw)
    for name, raw in (overrides or {}).items():
        if raw is None:
            continue
        name = _normalise_key(name)
        values[name] = raw if not isinstance(raw, str) else _coerce(name, raw)
    try:
        config = RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    logger.debug(f"Loaded config: {config.to_dict()}")
    return config

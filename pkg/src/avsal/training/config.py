"""Training configuration: a flat key=value file format plus overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

STAGES = ("pretrain_visual", "pretrain_face", "pretrain_audio_joint", "joint")


class ConfigError(ValueError):
    """Raised for invalid, inconsistent or incomplete configuration."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run needs.

    ``init_checkpoint`` carries weights forward between stages
    (pretrain_visual -> pretrain_audio_joint -> joint); the joint stage
    additionally needs ``face_checkpoint`` from the face pretraining.
    The three ``*_asset`` paths optionally initialize the RGB stack, the
    flow stack and the face CNN from externally trained weights.
    """

    stage: str = "joint"
    archive: str = ""
    out_dir: str = "runs/train"

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 4
    max_steps: int = 500
    seed: int = 0

    input_resolution: int = 256
    width_divisor: int = 1

    init_checkpoint: Optional[str] = None
    face_checkpoint: Optional[str] = None

    rgb_asset: Optional[str] = None
    flow_asset: Optional[str] = None
    face_asset: Optional[str] = None
    require_pretrained: bool = False

    target_loss: Optional[float] = None
    min_steps: int = 0
    lr_decay_every: Optional[int] = None
    lr_decay_factor: float = 0.1
    log_every: int = 50

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError(f"unknown stage {self.stage!r}; choose from {', '.join(STAGES)}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1 or self.max_steps < 1:
            raise ConfigError("batch_size and max_steps must be >= 1")
        if self.lr_decay_every is not None and self.lr_decay_every < 1:
            raise ConfigError("lr_decay_every must be >= 1 when set")

    @classmethod
    def from_file(cls, path: str | Path, overrides: Optional[dict] = None) -> "TrainConfig":
        """Read `key = value` lines ('#' comments allowed), apply overrides."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values: dict = {}
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        parsed: dict = {}
        for key, val in values.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = _coerce(key, val, fields[key].type)
        return cls(**parsed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(key: str, val, type_str) -> object:
    """Parse a string value according to the declared field type."""
    if not isinstance(val, str):
        return val
    t = str(type_str)
    optional = "Optional" in t
    if optional and val.lower() in ("", "none"):
        return None
    try:
        if "int" in t:
            return int(val)
        if "float" in t:
            return float(val)
        if "bool" in t:
            low = val.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {val!r}")
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc
    return val

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .events import DEFAULT_HEIGHT, DEFAULT_WIDTH


@dataclass(frozen=True)
class PipelineConfig:
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    window_mode: str = "count"  # "count" or "time_us"
    window_value: int = 7500
    K: int = 4
    alpha: float = 0.5
    epsilon: float = 1e-8
    sample_n: int = 2048
    seed: int = 0
    precision: str = "f64"
    channels: int = 64

    def __post_init__(self):
        if self.window_mode not in ("count", "time_us"):
            raise ValueError(f"window_mode must be 'count' or 'time_us', not {self.window_mode!r}")
        if self.window_value < 1:
            raise ValueError("window_value must be >= 1")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.sample_n < 1:
            raise ValueError("sample_n must be >= 1")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.precision not in ("f64", "f32"):
            raise ValueError("precision must be 'f64' or 'f32'")
        if self.width < 1 or self.height < 1 or self.channels < 1:
            raise ValueError("sensor size and channel count must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def override(self, **kw) -> "PipelineConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return PipelineConfig(**d)

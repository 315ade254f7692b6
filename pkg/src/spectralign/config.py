"""Run configuration: defaults, validation and a flat JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Config:
    k_per_metric: int = 20
    alpha: float = 0.33
    eps: float = 1e-8
    reparam: str = "saturation"
    c_factor: float = 50.0  # saturation constant = c_factor * largest target eigenvalue
    n_fps: int = 20
    max_iter: int = 150
    parallelism: int = 1
    seed: int = 0
    ablation: str = "dual"  # dual: k regular + k scale-invariant; single: 2k regular only

    def __post_init__(self):
        for name in ("k_per_metric", "eps", "c_factor", "n_fps", "max_iter", "parallelism"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.reparam not in ("saturation", "square"):
            raise ValueError(f"unknown reparam {self.reparam!r}")
        if self.ablation not in ("dual", "single"):
            raise ValueError(f"unknown ablation {self.ablation!r}")

    @property
    def k_regular(self) -> int:
        return self.k_per_metric if self.ablation == "dual" else 2 * self.k_per_metric

    @property
    def k_scale_invariant(self) -> int:
        return self.k_per_metric if self.ablation == "dual" else 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def override(self, **changes) -> "Config":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "Config":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

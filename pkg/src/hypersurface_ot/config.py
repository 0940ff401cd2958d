"""Global numerical knobs and run configuration."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

FORMAT_VERSION = "1.0"

# 1 - |<x, y>| below this means two projective points are equal.
PROJ_EQ_TOL = 1e-9
# unit-norm / orthonormality checks on representatives and frames
UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Tolerances:
    cluster_radius_factor: float = 1e-6  # clustering radius = factor * d
    guard_delta: float = 1e-3  # min |grad p| on sampled zeros
    eq_tol: float = PROJ_EQ_TOL
    near_discriminant: float = 1e-8

    def cluster_radius(self, d: int) -> float:
        return self.cluster_radius_factor * d


@dataclass
class RunConfig:
    """Everything that determines a CLI run; serialized into every output."""

    seed: int = 0
    lines: int = 2000
    time_nodes: int = 64
    q: float = 2.0
    epsilon: float = 1e-3
    knots: int = 17
    threads: int = 1
    out: str | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        for name in ("lines", "time_nodes", "knots", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_env(cls, prefix: str = "HSOT_", **overrides) -> "RunConfig":
        """Build a config where ``{prefix}SEED`` etc. override the given values."""
        kwargs = dict(overrides)
        casts = {"seed": int, "lines": int, "time_nodes": int, "q": float,
                 "epsilon": float, "knots": int, "threads": int}
        for name, cast in casts.items():
            env = os.environ.get(prefix + name.upper())
            if env is not None:
                kwargs[name] = cast(env)
        return cls(**kwargs)

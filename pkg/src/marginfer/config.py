"""Run configuration shared by the command-line tools."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .linalg import DELTA_TOL, DRIFT_BOUND, REFACTOR_PERIOD, SIGMA_TOL, Tolerances
from .oracle import N_LIMIT

FORMATS = ("json", "csv", "text")


@dataclass(frozen=True)
class Config:
    sigma_tol: float = SIGMA_TOL
    delta_tol: float = DELTA_TOL
    refactor_period: int = REFACTOR_PERIOD
    drift_bound: float = DRIFT_BOUND
    n_limit: int = N_LIMIT
    seed: int = 0
    format: str = "json"

    def __post_init__(self):
        if min(self.sigma_tol, self.delta_tol, self.drift_bound) <= 0:
            raise ValueError("tolerances must be positive")
        if self.refactor_period < 1:
            raise ValueError("refactor_period must be at least 1")
        if not 1 <= self.n_limit <= N_LIMIT:
            raise ValueError(f"n_limit must lie in [1, {N_LIMIT}]")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(self.sigma_tol, self.delta_tol, self.refactor_period, self.drift_bound)

    @classmethod
    def from_dict(cls, doc: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)

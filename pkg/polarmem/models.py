# models.py
from __future__ import annotations

import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Family = Literal["polar", "conv-polar"]
Regime = Literal["base", "int", "corr"]


class CodeSpec(BaseModel):
    """Code family, length 2^n and frozen set (0-based positions)."""

    model_config = ConfigDict(frozen=True)

    family: Family
    n: int = Field(ge=1)
    frozen: Tuple[int, ...] = ()
    frozen_value: Literal[0] = 0

    @field_validator("frozen", mode="before")
    @classmethod
    def _sort_frozen(cls, value):
        return tuple(sorted({int(i) for i in value}))

    @model_validator(mode="after")
    def _check_frozen(self) -> "CodeSpec":
        if self.frozen and (self.frozen[0] < 0 or self.frozen[-1] >= self.N):
            raise ValueError(f"frozen positions must lie in [0, {self.N}), got {self.frozen}")
        return self

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def k(self) -> int:
        return self.N - len(self.frozen)

    @property
    def rate(self) -> float:
        return self.k / self.N

    @property
    def free(self) -> Tuple[int, ...]:
        frozen = set(self.frozen)
        return tuple(i for i in range(self.N) if i not in frozen)


class ChannelParams(BaseModel):
    """Gilbert-Elliott parameters as they appear in grids and CSV rows."""

    model_config = ConfigDict(frozen=True)

    hG: float = Field(ge=0.0, le=1.0)
    hB: float = Field(ge=0.0, le=1.0)
    pGB: float = Field(ge=0.0, le=1.0)
    pBG: float = Field(ge=0.0, le=1.0)

    @property
    def mean_burst(self) -> float:
        return math.inf if self.pBG == 0 else 1.0 / self.pBG


class SimConfig(BaseModel):
    """One point of a FER sweep."""

    family: Family
    n: int = Field(ge=1, le=16)
    rate: float = Field(ge=0.0, le=1.0)
    k: Optional[int] = None
    regime: Regime = "corr"
    channel: ChannelParams
    max_frames: int = Field(default=100_000, ge=0)
    max_errors: int = Field(default=100, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    interleaver: Literal["fresh", "fixed"] = "fresh"
    engine: Literal["fast", "sweep"] = "fast"
    window_size: Optional[int] = Field(default=None, ge=1)
    record_timing: bool = False

    @model_validator(mode="after")
    def _resolve_k(self) -> "SimConfig":
        N = 1 << self.n
        if self.k is None:
            # rate 1/3 has no integral k at any power-of-two length; round to nearest
            self.k = int(round(self.rate * N))
        if not 0 <= self.k <= N:
            raise ValueError(f"k={self.k} outside [0, {N}]")
        return self

    @property
    def N(self) -> int:
        return 1 << self.n


class TrialOutcome(BaseModel):
    frame_error: bool
    bit_errors: int
    contractions: int = 0


class FerResult(BaseModel):
    frames: int = 0
    frame_errors: int = 0
    bit_errors: int = 0
    fer: Optional[float] = None
    ci_lo: Optional[float] = None
    ci_hi: Optional[float] = None
    seconds: Optional[float] = None
    contractions: int = 0

    @model_validator(mode="after")
    def _check_counts(self) -> "FerResult":
        if self.frame_errors > self.frames:
            raise ValueError(f"frame_errors={self.frame_errors} exceeds frames={self.frames}")
        return self

    @property
    def undefined(self) -> bool:
        return self.frames == 0


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


class CheckReport(BaseModel):
    level: Literal["quick", "full"]
    checks: List[CheckResult] = []

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

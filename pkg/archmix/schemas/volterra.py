"""Volterra expansion schemas."""

from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class PastBlock(BaseModel):
    """Past values x_0, x_{-1}, ... with a declared constant level beyond the explicit ones."""

    model_config = ConfigDict(frozen=True, json_schema_extra={"example": {"values": [2.0], "tail_level": 0.0}})

    values: List[float] = Field(..., description="x_0, x_{-1}, ... (most recent first)")
    tail_level: float = Field(default=0.0, ge=0, description="x_{-i} for i >= len(values)")

    @field_validator("values")
    @classmethod
    def _check_values(cls, value: List[float]) -> List[float]:
        if any(not np.isfinite(x) or x < 0 for x in value):
            raise ValueError("x: past values must be finite and nonnegative")
        return value

    def scaled(self, factor: float) -> "PastBlock":
        return PastBlock(values=[factor * x for x in self.values], tail_level=factor * self.tail_level)


class PqTerms(BaseModel):
    """Split of X_{t+k+s} / Z_{t+k+s} into an innovation part P and a past-block part Q."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"p_term": 0.15, "q_term": 0.5, "s": 0, "k": 2, "t": 0, "conditioning_block": [1.0]}
        },
    )

    p_term: float = Field(..., gt=0, description="Innovation-driven part")
    q_term: float = Field(..., ge=0, description="Part linear in the past block")
    s: int = Field(..., ge=0)
    k: int = Field(..., ge=1)
    t: int = Field(default=0)
    conditioning_block: List[float] = Field(default_factory=list, description="Innovations used")

    @property
    def scale(self) -> float:
        return self.p_term + self.q_term


class PsiSequence(BaseModel):
    """Coefficients of (1 - sum_j a_j z^j)^{-1} = sum_j psi_j z^j."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray = Field(..., description="psi_0..psi_L")
    source_coeffs: np.ndarray = Field(..., description="a_1.. that were inverted")

    @property
    def length(self) -> int:
        return int(self.values.size - 1)

    def residual(self) -> float:
        """Max |psi_k - sum_{j<=k} a_j psi_{k-j}| over 1 <= k <= L."""
        a = np.zeros(self.values.size)
        n = min(self.source_coeffs.size, self.values.size - 1)
        a[1 : n + 1] = self.source_coeffs[:n]
        conv = np.convolve(a, self.values)[: self.values.size]
        return float(np.max(np.abs(self.values[1:] - conv[1:]), initial=0.0))


class TailFunctional(BaseModel):
    """d_k(x) = sum_i a_{k+i} x_{-i} for k = 1..k_max; zero for k <= 0."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray = Field(..., description="d_1..d_kmax")

    @property
    def k_max(self) -> int:
        return int(self.values.size)

    def at(self, k: int) -> float:
        if k <= 0:
            return 0.0
        return float(self.values[k - 1])

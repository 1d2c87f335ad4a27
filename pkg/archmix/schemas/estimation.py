"""Empirical mixing-estimation schemas."""

from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class JointCellTable(BaseModel):
    """Joint cell counts of a left window (t, ..., t-r1) and a right window (t+k, ..., t+k+r2)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(..., ge=1)
    t: Optional[int] = Field(None, description="Cross-sectional time, None when pooled over t")
    r_left: int = Field(..., ge=0)
    r_right: int = Field(..., ge=0)
    m: int = Field(..., ge=2, description="Bins per coordinate")
    edges: List[np.ndarray] = Field(..., description="Interior bin edges per coordinate, left then right")
    counts: np.ndarray = Field(..., description="(left cells, right cells) integer counts")
    batch_counts: np.ndarray = Field(..., description="(batches, left cells, right cells) counts")

    @model_validator(mode="after")
    def _check_counts(self) -> "JointCellTable":
        if self.counts.ndim != 2 or self.batch_counts.ndim != 3:
            raise ValueError("counts: expected a 2-d table and a 3-d batch stack")
        if self.counts.shape != (self.m ** (self.r_left + 1), self.m ** (self.r_right + 1)):
            raise ValueError("counts: shape does not match windows and grid")
        if not np.array_equal(self.batch_counts.sum(axis=0), self.counts):
            raise ValueError("batch_counts: batches must add up to the pooled table")
        if self.sample_count == 0:
            raise ValueError("counts: empty table")
        return self

    @property
    def sample_count(self) -> int:
        return int(self.counts.sum())

    @property
    def batch_count(self) -> int:
        return int(self.batch_counts.shape[0])

    @property
    def cell_probs(self) -> np.ndarray:
        return self.counts / self.sample_count

    @property
    def left_marginal(self) -> np.ndarray:
        return self.cell_probs.sum(axis=1)

    @property
    def right_marginal(self) -> np.ndarray:
        return self.cell_probs.sum(axis=0)

    def batch_table(self, b: int) -> "JointCellTable":
        counts = self.batch_counts[b]
        return self.model_copy(update={"counts": counts, "batch_counts": counts[None, :, :]})


class EstimateCurve(BaseModel):
    """Per-lag empirical mixing estimates with batch-means standard errors."""

    model_config = ConfigDict(frozen=True)

    lags: List[int]
    alpha_hat: List[float]
    beta_hat: List[float]
    twomix_hat: List[float]
    se_alpha: List[float]
    se_beta: List[float]
    se_twomix: List[float]
    m: int
    r_left: int
    r_right: int
    n: List[int] = Field(..., description="Samples per lag")
    exact: List[bool] = Field(..., description="False where alpha_hat came from threshold ascent")


class CovarianceCurve(BaseModel):
    """Per-lag autocovariances cov(X_t, X_{t+k}) with batch-means standard errors."""

    model_config = ConfigDict(frozen=True)

    lags: List[int]
    cov: List[float]
    se: List[float]
    t_averaged: bool = Field(default=True, description="Pooled over t rather than cross-sectional")


class DecayFit(BaseModel):
    """Least-squares decay classification of a positive curve."""

    model_config = ConfigDict(frozen=True, json_schema_extra={"example": {"kind": "geometric", "param": 0.7}})

    kind: Literal["geometric", "polynomial"]
    param: float = Field(..., description="Ratio exp(slope) or exponent slope")
    slope: float
    intercept: float
    r_squared: float
    alternative_r_squared: float = Field(..., description="R^2 of the losing class")

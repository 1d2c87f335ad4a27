"""Theoretical bound schemas."""

from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class EtaProblem(BaseModel):
    """inf over eta > 0 of sum_i (c_i eta_i + d_i eta_i^(-nu))."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"example": {"c": [1.0, 2.0], "d": [3.0, 1.0], "nu": 2.0}},
    )

    c: List[float] = Field(..., min_length=1, description="Linear cost weights")
    d: List[float] = Field(..., min_length=1, description="Tail weights")
    nu: float = Field(..., gt=0, description="Tail exponent")

    @model_validator(mode="after")
    def _check_weights(self) -> "EtaProblem":
        if len(self.c) != len(self.d):
            raise ValueError("d: must have the same length as c")
        for name, seq in (("c", self.c), ("d", self.d)):
            if any(not np.isfinite(v) or v <= 0 for v in seq):
                raise ValueError(f"{name}: entries must be positive and finite")
        return self

    def objective(self, eta) -> float:
        eta = np.asarray(eta, dtype=float)
        c = np.asarray(self.c)
        d = np.asarray(self.d)
        return float(np.sum(c * eta + d * eta ** (-self.nu)))


class RateClass(BaseModel):
    """Symbolic decay class of the ARCH(inf) bounds."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["geometric", "polynomial"]
    param: float = Field(..., description="Tail ratio or tail exponent")
    nu: float = Field(..., description="Moment order")
    delta_tilde: Optional[float] = Field(None, description="exponent * nu / (nu + 1), polynomial only")
    alpha_beta_expr: str
    twomix_expr: str

    def alpha_beta_at(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.kind == "geometric":
            return k * self.param ** (k / 2.0)
        dt = self.delta_tilde
        return k * (k + 1.0) ** (-dt + 3.0) + (k + 1.0) ** (-dt + 2.0)

    def twomix_at(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.kind == "geometric":
            return k * self.param ** (k / 2.0)
        return k * (k + 1.0) ** (-self.delta_tilde + 1.0)

    @property
    def label(self) -> str:
        if self.kind == "geometric":
            return f"geometric(ratio={self.param ** 0.5:.6g})"
        return f"polynomial(delta_tilde={self.delta_tilde:.6g})"


class TvArchBound(BaseModel):
    """tvARCH mixing bound at one (t, k)."""

    model_config = ConfigDict(frozen=True)

    t: int
    k: int
    explicit: float = Field(..., ge=0, description="Closed-form infimum with exact Q-weights")
    envelope: float = Field(..., ge=0, description="K' * (1 - delta_tilde)^(k/2)")
    k_prime: float = Field(..., ge=0, description="Envelope constant")
    delta_tilde: float
    lipschitz: float = Field(..., description="K used (clause iii or iv)")
    mean_bound: float
    inf_intercept: float
    tv_weights: List[float] = Field(..., description="Per-coordinate linear TV weights c_j")


class ArchInfBound(BaseModel):
    """ARCH(inf) mixing bound at one lag."""

    model_config = ConfigDict(frozen=True)

    k: int
    packaged: float = Field(..., ge=0, description="K(nu)-packaged value")
    tight: float = Field(..., ge=0, description="Direct eta-infimum of the unpackaged objective")
    i_max: int
    s_max: Optional[int] = None
    i_certificate: float = Field(..., ge=0, description="Bound on the neglected i-sum (already added)")
    s_certificate: float = Field(default=0.0, ge=0, description="s-sum mass beyond s_max (already added)")
    k_nu: float
    moment: float = Field(..., description="Bound on E|X_0|^nu")


class SpectralDecayReport(BaseModel):
    """Spectral norms of backward companion products and the smallest geometric constant."""

    model_config = ConfigDict(frozen=True)

    t: int
    k_max: int
    delta_tilde: float
    norms: List[float] = Field(..., description="||prod_{i<k} A~_{t-i}||_2 for k = 1..k_max")
    k_constant: float = Field(..., description="max_k norm_k / (1 - delta_tilde)^k")
    block_factors: List[float] = Field(..., description="Infinity norms of consecutive p-blocks")


class BoundCurve(BaseModel):
    """Per-lag theoretical bounds with the constants they were assembled from."""

    model_config = ConfigDict(frozen=True)

    lags: List[int]
    alpha_bound: List[float]
    beta_bound: List[float]
    twomix_bound: List[float]
    tight_alpha: List[float]
    constants: Dict[str, Any] = Field(default_factory=dict)
    rate_class: str
    monotone_from: Optional[int] = Field(None, description="Lag from which the alpha curve is nonincreasing")

    @model_validator(mode="after")
    def _check_lengths(self) -> "BoundCurve":
        n = len(self.lags)
        for name in ("alpha_bound", "beta_bound", "twomix_bound", "tight_alpha"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name}: one value per lag")
        return self


class LinearTvTerm(BaseModel):
    """TV-sum of the form sum_i c_i eta_i."""

    model_config = ConfigDict(frozen=True, json_schema_extra={"example": {"weights": [0.5, 1.0]}})

    weights: List[float] = Field(..., min_length=1, description="Nonnegative c_i")

    @model_validator(mode="after")
    def _check_weights(self) -> "LinearTvTerm":
        if any(not np.isfinite(v) or v < 0 for v in self.weights):
            raise ValueError("weights: entries must be nonnegative and finite")
        return self

    def __call__(self, eta) -> float:
        return float(np.dot(self.weights, np.asarray(eta, dtype=float)))


class PowerTailTerm(BaseModel):
    """Tail probability bound of the form sum_i d_i eta_i^(-nu)."""

    model_config = ConfigDict(frozen=True, json_schema_extra={"example": {"weights": [0.75, 0.25], "nu": 1.0}})

    weights: List[float] = Field(..., min_length=1, description="Nonnegative d_i")
    nu: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_weights(self) -> "PowerTailTerm":
        if any(not np.isfinite(v) or v < 0 for v in self.weights):
            raise ValueError("weights: entries must be nonnegative and finite")
        return self

    def __call__(self, eta) -> float:
        eta = np.asarray(eta, dtype=float)
        return float(np.sum(np.asarray(self.weights) * eta ** (-self.nu)))

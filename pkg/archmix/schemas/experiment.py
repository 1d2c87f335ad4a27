"""Experiment configuration and check-result schemas."""

import hashlib
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

Command = Literal["simulate", "bound", "estimate", "verify", "sweep", "report"]
Suite = Literal["volterra", "density", "minimize-eta", "all"]


class ExperimentConfig(BaseModel):
    """Every knob of one CLI run."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "command": "sweep",
                "spec": "fixtures/arch1_tvarch.json",
                "seed": 7,
                "k_lo": 1,
                "k_hi": 10,
                "samples": 1000000,
                "grid": 8,
            }
        },
    )

    command: Command = Field(..., description="Subcommand")
    spec: Optional[str] = Field(None, description="Path of the JSON spec file")
    innovation: Optional[str] = Field(None, description="Innovation override, e.g. exponential or chi2:3")
    seed: int = Field(default=0, ge=0, lt=2**64, description="64-bit master seed")
    k_lo: int = Field(default=1, ge=1, description="First lag")
    k_hi: int = Field(default=10, ge=1, description="Last lag")
    samples: int = Field(default=100_000, gt=0, description="Pooled samples per lag (estimate) or path length")
    replicates: int = Field(default=16, gt=0, description="Independent replicates")
    grid: int = Field(default=8, ge=2, description="Bins per coordinate")
    r_left: Optional[int] = Field(None, ge=0, description="Left window; default p (tvARCH) or config (ARCH(inf))")
    r_right: int = Field(default=0, ge=0, description="Right window")
    t: Optional[int] = Field(None, description="Cross-sectional time; None pools over t")
    s_max: Optional[int] = Field(None, gt=0, description="Recorded s-sum truncation (the s-sum is exact)")
    i_max: Optional[int] = Field(None, gt=0, description="Explicit i-sum truncation")
    tail_tol: float = Field(default=1e-8, gt=0, description="Tail tolerance for truncations")
    delta_tilde: Optional[float] = Field(None, gt=0, lt=1, description="Contraction exponent override")
    out: str = Field(default="archmix_out", description="Output directory")
    workers: int = Field(default=1, gt=0, description="Worker threads")
    variant: Literal["packaged", "tight"] = Field(default="packaged", description="Bound variant")
    literal: bool = Field(default=False, description="Use the a_j|psi_j| 2-mixing bracket")
    suite: Suite = Field(default="all", description="verify suite")
    with_bound: bool = Field(default=True, description="sweep: compute bounds")
    with_estimate: bool = Field(default=True, description="sweep: compute estimates")
    input: Optional[str] = Field(None, description="report: sweep CSV to summarize")

    @model_validator(mode="after")
    def _check_lags(self) -> "ExperimentConfig":
        if self.k_hi < self.k_lo:
            raise ValueError("k: range must satisfy A <= B")
        return self

    @property
    def lags(self) -> List[int]:
        return list(range(self.k_lo, self.k_hi + 1))

    def config_hash(self) -> str:
        """SHA-256 of the result-relevant fields (output location and threads excluded)."""
        canonical = self.model_dump_json(exclude={"out", "workers"})
        return hashlib.sha256(canonical.encode()).hexdigest()


class CheckRow(BaseModel):
    """One line of a verification table."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"check": "psi_convolution", "instances": 50, "max_rel_err": 0.0, "passed": True}
        },
    )

    check: str = Field(..., description="Identity checked")
    instances: int = Field(..., ge=0, description="Instances evaluated")
    max_rel_err: float = Field(..., ge=0, description="Largest error seen (relative unless noted)")
    passed: bool

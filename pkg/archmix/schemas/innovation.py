"""Innovation law schemas."""

from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import special, stats


class InnovationName(str, Enum):
    """The fixed menu of positive unit-mean innovation laws."""

    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    CHI2 = "chi2"


class InnovationLaw(BaseModel):
    """A positive unit-mean innovation law Z with density, inverse CDF and moments."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"example": {"name": "chi2", "dof": 3}},
    )

    name: InnovationName = Field(..., description="Law identifier")
    dof: Optional[int] = Field(None, ge=1, description="Degrees of freedom m of chi2_m / m")

    @model_validator(mode="after")
    def _check_dof(self) -> "InnovationLaw":
        if self.name is InnovationName.CHI2 and self.dof is None:
            raise ValueError("dof: scaled chi-square needs degrees of freedom")
        if self.name is not InnovationName.CHI2 and self.dof is not None:
            raise ValueError(f"dof: not used by the {self.name.value} law")
        return self

    @property
    def label(self) -> str:
        if self.name is InnovationName.CHI2:
            return f"chi2({self.dof})"
        return self.name.value

    def _dist(self):
        if self.name is InnovationName.EXPONENTIAL:
            return stats.expon()
        if self.name is InnovationName.UNIFORM:
            return stats.uniform(loc=0.0, scale=2.0)
        return stats.chi2(self.dof, scale=1.0 / self.dof)

    def density(self, z):
        """Density f_Z, zero off the support. Closed forms, vectorized."""
        z = np.asarray(z, dtype=float)
        if self.name is InnovationName.EXPONENTIAL:
            return np.where(z >= 0, np.exp(-np.abs(z)), 0.0)
        if self.name is InnovationName.UNIFORM:
            return np.where((z >= 0) & (z <= 2.0), 0.5, 0.0)
        half = 0.5 * self.dof
        log_norm = half * np.log(half) - special.gammaln(half)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_pdf = log_norm + (half - 1.0) * np.log(z) - half * z
            return np.where(z > 0, np.exp(log_pdf), 0.0)

    def cdf(self, z):
        return self._dist().cdf(np.asarray(z, dtype=float))

    def ppf(self, u):
        """Inverse CDF of a uniform variate on [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.name is InnovationName.EXPONENTIAL:
            return -np.log1p(-u)
        if self.name is InnovationName.UNIFORM:
            return 2.0 * u
        return self._dist().ppf(u)

    def moment(self, nu: float) -> float:
        """E[Z^nu] for nu >= 0."""
        if self.name is InnovationName.EXPONENTIAL:
            return float(special.gamma(1.0 + nu))
        if self.name is InnovationName.UNIFORM:
            return float(2.0**nu / (nu + 1.0))
        m = float(self.dof)
        log_moment = nu * np.log(2.0 / m) + special.gammaln(m / 2.0 + nu) - special.gammaln(m / 2.0)
        return float(np.exp(log_moment))

    def upper_quantile(self, mass: float) -> float:
        """Point beyond which the law has probability `mass`."""
        if self.name is InnovationName.UNIFORM:
            return 2.0
        return float(self._dist().isf(mass))

    @property
    def singular_at_zero(self) -> bool:
        """True when the density is unbounded at 0 (chi-square with one degree of freedom)."""
        return self.name is InnovationName.CHI2 and self.dof == 1

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Interior discontinuities of the density."""
        if self.name is InnovationName.UNIFORM:
            return (2.0,)
        return ()


class InnovationModel(BaseModel):
    """An innovation law together with its certified Lipschitz constants."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "law": {"name": "exponential"},
                "lipschitz_iii": 0.9999,
                "lipschitz_iv": 0.9999,
                "second_moment": 2.0,
                "a_grid_points": 24,
                "tau_points": 16,
            }
        },
    )

    law: InnovationLaw = Field(..., description="Underlying law")
    lipschitz_iii: float = Field(..., gt=0, description="Certified K for the scale-shift TV clause")
    lipschitz_iv: float = Field(..., gt=0, description="Certified K for the supremum-form clause")
    second_moment: float = Field(..., gt=0, description="E[Z^2]")
    a_grid_points: int = Field(..., ge=1, description="a-grid size used for certification")
    tau_points: int = Field(..., ge=1, description="tau-subgrid size used for clause (iv)")

    @model_validator(mode="after")
    def _check_order(self) -> "InnovationModel":
        if self.lipschitz_iv < self.lipschitz_iii:
            raise ValueError("lipschitz_iv: must be at least lipschitz_iii")
        return self

    @property
    def name(self) -> InnovationName:
        return self.law.name

    @property
    def label(self) -> str:
        return self.law.label

    def density(self, z):
        return self.law.density(z)

    def ppf(self, u):
        return self.law.ppf(u)

    def moment(self, nu: float) -> float:
        return self.law.moment(nu)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n innovations by inverse CDF from the generator's uniforms."""
        return self.law.ppf(rng.random(n))

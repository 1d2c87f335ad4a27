"""Density-analysis report schemas."""

from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field


class LipschitzCertificate(BaseModel):
    """Numerical Lipschitz constants of an innovation density under scale perturbation."""

    model_config = ConfigDict(frozen=True)

    law: str = Field(..., description="Law label")
    a_grid: List[float] = Field(..., description="Scale perturbations checked")
    tau_points: int = Field(..., description="Inner tau-subgrid size for the supremum clause")
    ratios_iii: List[float] = Field(..., description="(1/a) * int |f(u) - f(u(1+a))| du")
    ratios_iv: List[float] = Field(..., description="(1/a) * int sup_tau |f(u) - f(u(1+tau))| du")
    scale_tv_ratios: List[float] = Field(..., description="(1/a) * TV between f and its (1+a)-rescaling")
    k_iii: float = Field(..., description="max of ratios_iii")
    k_iv: float = Field(..., description="max of ratios_iv")


class TvReport(BaseModel):
    """Scale-mixture TV values against their right-hand sides."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "law": "uniform",
                "pairs": [[1.0, 1.0]],
                "tv_values": [1.0],
                "bound_values": [1.5],
                "ratio_max": 0.6667,
            }
        },
    )

    law: str = Field(..., description="Law label")
    pairs: List[Tuple[float, float]] = Field(..., description="(A, B) pairs")
    tv_values: List[float] = Field(..., description="Quadrature TV integrals")
    bound_values: List[float] = Field(..., description="K*(B/A) + B/(A+B)")
    ratio_max: float = Field(..., description="max tv/bound over pairs with bound > 0")

    @property
    def passed(self) -> bool:
        return all(tv <= bound + 1e-6 for tv, bound in zip(self.tv_values, self.bound_values))

"""
Configuration management for archmix.

Numerical tolerances, truncation limits, estimator knobs and runtime options,
read from the environment (prefix ARCHMIX_) and an optional .env file.
"""

import os
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

_SETTINGS = SettingsConfigDict(
    env_prefix="ARCHMIX_",
    env_file=".env",
    case_sensitive=False,
    extra="ignore",  # Ignore unrelated environment variables
)


class SimulationConfig(BaseSettings):
    """Configuration for path simulation."""

    model_config = _SETTINGS

    tail_tol: float = Field(
        default=1e-8,
        gt=0,
        description="Max ARCH(inf) coefficient mass beyond the truncation lag, relative to 1 - sum(a)",
    )
    burn_in_factor: int = Field(
        default=10, ge=1, description="Default burn-in is this factor times max(order, floor)"
    )
    burn_in_floor: int = Field(default=50, ge=0, description="Floor inside the burn-in max()")
    archinf_min_burn_factor: int = Field(
        default=5, ge=1, description="ARCH(inf) burn-in must be at least this times the truncation lag"
    )
    max_truncation_lag: int = Field(
        default=1_000_000, ge=1, description="Largest truncation lag the simulator will search"
    )
    replicates: int = Field(default=16, ge=1, description="Default replicate count")


class DensityConfig(BaseSettings):
    """Configuration for density quadrature and Lipschitz certification."""

    model_config = _SETTINGS

    a_min: float = Field(default=1e-4, gt=0, description="Smallest scale perturbation on the a-grid")
    a_max: float = Field(default=4.0, gt=0, description="Largest scale perturbation on the a-grid")
    a_points: int = Field(default=24, ge=2, description="Number of log-spaced a-grid points")
    tau_points: int = Field(default=16, ge=2, description="Points of the inner tau-subgrid")
    quad_abs_tol: float = Field(default=1e-9, gt=0, description="Absolute quadrature tolerance")
    tail_mass: float = Field(
        default=1e-12, gt=0, description="Integration domain is cut where the tail mass drops below this"
    )
    quad_limit: int = Field(default=500, ge=50, description="Max subintervals per quad call")
    dominance_slack: float = Field(default=1e-6, ge=0, description="Slack on TV <= bound checks")
    normalization_tol: float = Field(
        default=1e-10, gt=0, description="Quadrature tolerance on the innovation mass and mean"
    )
    mean_check_samples: int = Field(
        default=200_000, ge=1000, description="Draws for the sample-mean check of a new innovation"
    )


class BoundConfig(BaseSettings):
    """Configuration for theoretical bound evaluation."""

    model_config = _SETTINGS

    delta_tilde_fraction: float = Field(
        default=0.9, gt=0, lt=1, description="Default delta_tilde as a fraction of delta"
    )
    tail_tol: float = Field(
        default=1e-8, gt=0, description="Relative size allowed for i-sum tail certificates"
    )
    i_start: int = Field(default=256, ge=1, description="First i-truncation tried for rule tails")
    i_cap: int = Field(default=65536, ge=1, description="Largest automatic i-truncation")
    multi_index_limit: int = Field(default=12, ge=1, description="Largest k for the chain-sum oracle")
    route_tol: float = Field(default=1e-10, gt=0, description="Dual-route agreement tolerance")
    golden_tol: float = Field(default=1e-10, gt=0, description="Golden-section tolerance")
    power_tol: float = Field(default=1e-10, gt=0, description="Power-method tolerance")


class EstimationConfig(BaseSettings):
    """Configuration for empirical mixing estimation."""

    model_config = _SETTINGS

    grid: int = Field(default=8, ge=2, description="Bins per coordinate")
    n_batches: int = Field(default=16, ge=1, description="Batches for batch-means standard errors")
    archinf_left_window: int = Field(
        default=4, ge=0, description="Left window length r for ARCH(inf) tables"
    )
    max_cells: int = Field(default=4096, ge=2, description="Max cells on either side of a table")
    max_joint_cells: int = Field(
        default=1 << 22, ge=4, description="Max left x right cells of one table (memory guard)"
    )
    exhaustive_side_limit: int = Field(
        default=12, ge=1, description="Sides with at most this many cells are enumerated exactly"
    )
    heuristic_restarts: int = Field(default=64, ge=1, description="Restarts of threshold ascent")
    heuristic_seed: int = Field(default=0, ge=0, description="Seed of the threshold-ascent restarts")


class RuntimeConfig(BaseSettings):
    """Configuration for the command-line runtime."""

    model_config = _SETTINGS

    out: Optional[str] = Field(default=None, description="Output directory, overrides --out")
    workers: int = Field(
        default_factory=lambda: os.cpu_count() or 1, ge=1, description="Worker threads"
    )
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO", description="Root logging level"
    )


def get_simulation_config() -> SimulationConfig:
    """Get simulation configuration from environment."""
    return SimulationConfig()


def get_density_config() -> DensityConfig:
    """Get density configuration from environment."""
    return DensityConfig()


def get_bound_config() -> BoundConfig:
    """Get bound configuration from environment."""
    return BoundConfig()


def get_estimation_config() -> EstimationConfig:
    """Get estimation configuration from environment."""
    return EstimationConfig()


def get_runtime_config() -> RuntimeConfig:
    """Get runtime configuration from environment."""
    return RuntimeConfig()

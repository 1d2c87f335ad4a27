"""Process specification and simulated-path schemas."""

import hashlib
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import special

from errors import SpecValidationError

# ========== tvARCH(p) ==========


class CoefficientSchedule(BaseModel):
    """Piecewise-constant intercept and coefficient tables over time.

    Row i applies from breakpoints[i] up to the next breakpoint; the first row also
    covers every earlier t and the last row every later t.
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"breakpoints": [0, 500], "intercepts": [0.1, 0.3], "coeffs": [[0.4], [0.5]]}
        },
    )

    breakpoints: List[int] = Field(..., min_length=1, description="Strictly increasing start times")
    intercepts: List[float] = Field(..., description="a0 per row")
    coeffs: List[List[float]] = Field(..., description="(a1..ap) per row")

    @model_validator(mode="after")
    def _check_tables(self) -> "CoefficientSchedule":
        n = len(self.breakpoints)
        if len(self.intercepts) != n or len(self.coeffs) != n:
            raise SpecValidationError("coeff_schedules", "one intercept and coefficient row per breakpoint")
        if any(b1 <= b0 for b0, b1 in zip(self.breakpoints, self.breakpoints[1:])):
            raise SpecValidationError("breakpoints", "must be strictly increasing")
        if any(not np.isfinite(a) or a <= 0 for a in self.intercepts):
            raise SpecValidationError("intercept_schedule", "a0(t) must be positive and finite")
        widths = {len(row) for row in self.coeffs}
        if len(widths) != 1:
            raise SpecValidationError("coeff_schedules", "rows must share the same order p")
        if any(not np.isfinite(a) or a < 0 for row in self.coeffs for a in row):
            raise SpecValidationError("coeff_schedules", "a_j(t) must be nonnegative and finite")
        return self

    def rows_at(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        idx = np.searchsorted(np.asarray(self.breakpoints), times, side="right") - 1
        idx = np.clip(idx, 0, len(self.breakpoints) - 1)
        return np.asarray(self.intercepts)[idx], np.asarray(self.coeffs, dtype=float)[idx]


class TvArchSpec(BaseModel):
    """Time-varying ARCH(p): X_t = Z_t (a0(t) + sum_j a_j(t) X_{t-j})."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "kind": "tvarch",
                "p": 1,
                "schedule": {"breakpoints": [0], "intercepts": [0.1], "coeffs": [[0.5]]},
                "delta": 0.5,
            }
        },
    )

    kind: Literal["tvarch"] = "tvarch"
    p: int = Field(..., ge=1, description="Order")
    schedule: CoefficientSchedule = Field(..., description="Tabulated schedules")
    delta: float = Field(..., gt=0, lt=1, description="Contraction margin: sum_j a_j(t) <= 1 - delta")
    rule: Optional[Callable[[int], Tuple[float, Sequence[float]]]] = Field(
        default=None, exclude=True, description="Closed-form t -> (a0, (a1..ap)), overrides the table"
    )

    @model_validator(mode="after")
    def _check_order(self) -> "TvArchSpec":
        if len(self.schedule.coeffs[0]) != self.p:
            raise SpecValidationError("p", f"schedule rows have {len(self.schedule.coeffs[0])} coefficients")
        return self

    @classmethod
    def constant(cls, a0: float, coeffs: Sequence[float], delta: float) -> "TvArchSpec":
        """Time-invariant ARCH(p) as a one-row schedule."""
        schedule = CoefficientSchedule(breakpoints=[0], intercepts=[a0], coeffs=[list(coeffs)])
        return cls(p=len(coeffs), schedule=schedule, delta=delta)

    def coefficients_over(self, t_lo: int, t_hi: int) -> Tuple[np.ndarray, np.ndarray]:
        """Intercepts (n,) and coefficients (n, p) for t = t_lo..t_hi inclusive."""
        times = np.arange(t_lo, t_hi + 1)
        if self.rule is None:
            return self.schedule.rows_at(times)
        a0 = np.empty(times.size)
        a = np.empty((times.size, self.p))
        for n, t in enumerate(times):
            intercept, row = self.rule(int(t))
            a0[n] = intercept
            a[n] = np.asarray(row, dtype=float)
        if np.any(~np.isfinite(a0)) or np.any(a0 <= 0):
            raise SpecValidationError("intercept_schedule", f"rule gives a0(t) <= 0 on [{t_lo}, {t_hi}]")
        if np.any(~np.isfinite(a)) or np.any(a < 0):
            raise SpecValidationError("coeff_schedules", f"rule gives a_j(t) < 0 on [{t_lo}, {t_hi}]")
        return a0, a

    def intercept_at(self, t: int) -> float:
        return float(self.coefficients_over(t, t)[0][0])

    def coeffs_at(self, t: int) -> np.ndarray:
        return self.coefficients_over(t, t)[1][0]

    def span(self) -> Tuple[int, int]:
        """Range on which the table takes every one of its values."""
        return self.schedule.breakpoints[0], self.schedule.breakpoints[-1]

    @property
    def spec_id(self) -> str:
        payload = self.model_dump_json()
        if self.rule is not None:
            payload += f"|rule={self.rule_fingerprint()}"
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def rule_fingerprint(self) -> str:
        """Qualified name of the rule plus its values at the breakpoints and a few fixed times."""
        name = getattr(self.rule, "__qualname__", type(self.rule).__name__)
        times = sorted(set(self.schedule.breakpoints) | {0, 1, 10, 100, 1000})
        values: List[float] = []
        for t in times:
            values.append(self.intercept_at(t))
            values.extend(self.coeffs_at(t))
        module = getattr(self.rule, "__module__", "")
        return f"{module}.{name}:" + ",".join(f"{float(v):.17g}" for v in values)


# ========== ARCH(inf) ==========


class TailClass(BaseModel):
    """Declared decay class of a coefficient sequence."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: Literal["geometric", "polynomial"] = Field(..., alias="class", description="Decay class")
    param: float = Field(..., gt=0, description="Geometric ratio in (0,1) or polynomial exponent > 1")

    @model_validator(mode="after")
    def _check_param(self) -> "TailClass":
        if self.kind == "geometric" and not self.param < 1:
            raise SpecValidationError("tail", "geometric ratio must lie in (0, 1)")
        if self.kind == "polynomial" and not self.param > 1:
            raise SpecValidationError("tail", "polynomial exponent must exceed 1")
        return self


class CoefficientRule(BaseModel):
    """Closed-form coefficients: c*r^j (geometric) or c*j^(-e) (polynomial), j >= 1."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"example": {"kind": "polynomial", "scale": 0.3040, "param": 2.0}},
    )

    kind: Literal["geometric", "polynomial"] = Field(..., description="Rule family")
    scale: float = Field(..., gt=0, description="Multiplier c")
    param: float = Field(..., gt=0, description="Ratio r in (0,1) or exponent e > 1")

    @model_validator(mode="after")
    def _check_param(self) -> "CoefficientRule":
        TailClass(kind=self.kind, param=self.param)
        return self

    @classmethod
    def scaled_to(cls, kind: str, param: float, total: float) -> "CoefficientRule":
        """Rule of the given family whose coefficients sum to `total`."""
        if kind == "geometric":
            scale = total * (1.0 - param) / param
        else:
            scale = total / float(special.zeta(param, 1.0))
        return cls(kind=kind, scale=scale, param=param)

    def values(self, j: np.ndarray) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        if self.kind == "geometric":
            return self.scale * self.param**j
        return self.scale * j ** (-self.param)

    def tail_sum(self, q: np.ndarray) -> np.ndarray:
        """sum_{j >= q} a_j for q >= 1."""
        q = np.asarray(q, dtype=float)
        if self.kind == "geometric":
            return self.scale * self.param**q / (1.0 - self.param)
        return self.scale * special.zeta(self.param, q)


class ArchInfSpec(BaseModel):
    """ARCH(inf): X_t = Z_t (a0 + sum_{j>=1} a_j X_{t-j})."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "kind": "archinf",
                "a0": 1.0,
                "coeffs": [0.5],
                "delta": 0.3,
                "nu": 1.0,
                "tail": {"class": "geometric", "param": 0.5},
            }
        },
    )

    kind: Literal["archinf"] = "archinf"
    a0: float = Field(..., gt=0, description="Intercept")
    coeffs: List[float] = Field(default_factory=list, description="Explicit a_1..a_L, zero beyond L")
    rule: Optional[CoefficientRule] = Field(None, description="Closed-form coefficients")
    tail: Optional[TailClass] = Field(None, description="Declared decay class of explicit coefficients")
    delta: float = Field(..., gt=0, lt=1, description="Margin: sum_j a_j < 1 - delta")
    nu: float = Field(default=1.0, ge=1, description="Moment order")
    moment_bound: Optional[float] = Field(None, gt=0, description="User bound on E|X_0|^nu")

    @field_validator("coeffs")
    @classmethod
    def _check_coeffs(cls, value: List[float]) -> List[float]:
        if any(not np.isfinite(a) or a < 0 for a in value):
            raise SpecValidationError("coeffs", "coefficients must be nonnegative and finite")
        return value

    @model_validator(mode="after")
    def _check_source(self) -> "ArchInfSpec":
        if self.rule is not None and self.coeffs:
            raise SpecValidationError("coeffs", "give explicit coefficients or a rule, not both")
        return self

    @property
    def cutoff(self) -> Optional[int]:
        """Last explicit index, None for an infinite rule."""
        return None if self.rule is not None else len(self.coeffs)

    def coefficients(self, n: int) -> np.ndarray:
        """a_1..a_n."""
        return self.coefficients_at(np.arange(1, n + 1))

    def coefficient_array(self, n: int) -> np.ndarray:
        """Array of length n+1 holding a_0 := 0 (excluded index) followed by a_1..a_n."""
        out = np.zeros(n + 1)
        out[1:] = self.coefficients(n)
        return out

    def coefficients_at(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        out = np.zeros(idx.shape)
        valid = idx >= 1
        if self.rule is not None:
            out[valid] = self.rule.values(idx[valid])
        else:
            explicit = np.asarray(self.coeffs, dtype=float)
            inside = valid & (idx <= explicit.size)
            out[inside] = explicit[idx[inside] - 1]
        return out

    def tail_sum(self, q) -> np.ndarray:
        """sum_{j >= q} a_j, with q clipped below at 1."""
        q = np.maximum(np.asarray(q, dtype=np.int64), 1)
        if self.rule is not None:
            return np.asarray(self.rule.tail_sum(q), dtype=float)
        explicit = np.asarray(self.coeffs, dtype=float)
        suffix = np.concatenate([np.cumsum(explicit[::-1])[::-1], [0.0]])
        return suffix[np.minimum(q, explicit.size + 1) - 1]

    def tail_mass(self, lag: int) -> float:
        """Coefficient mass beyond `lag`."""
        return float(self.tail_sum(lag + 1))

    def total(self) -> float:
        return float(self.tail_sum(1))

    def rate_tail(self) -> Optional[TailClass]:
        """Decay class implied by the rule, else the declared one."""
        if self.rule is not None:
            return TailClass(kind=self.rule.kind, param=self.rule.param)
        return self.tail

    def truncated(self, lag: int) -> "ArchInfSpec":
        """Explicit spec keeping a_1..a_lag only."""
        return self.model_copy(
            update={"coeffs": [float(a) for a in self.coefficients(lag)], "rule": None, "tail": self.rate_tail()}
        )

    @property
    def spec_id(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()[:16]


# ========== Assumption reports ==========


class AssumptionClause(BaseModel):
    """Outcome of one assumption clause."""

    model_config = ConfigDict(
        json_schema_extra={
            "example": {"clause": "tv_contraction", "passed": True, "value": 0.5, "threshold": 0.5, "witness": "t=0"}
        }
    )

    clause: str = Field(..., description="Clause identifier")
    passed: bool = Field(..., description="Whether the clause holds")
    value: float = Field(..., description="Checked quantity")
    threshold: float = Field(..., description="Bound it is compared with")
    witness: Optional[str] = Field(None, description="Where the extreme value occurs")


class AssumptionReport(BaseModel):
    """Pass/fail per assumption clause."""

    kind: Literal["tvarch", "archinf"]
    clauses: List[AssumptionClause] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failures(self) -> List[AssumptionClause]:
        return [c for c in self.clauses if not c.passed]


# ========== Simulated paths ==========


class PathEnsemble(BaseModel):
    """Simulated sample paths with seed provenance."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec_id: str = Field(..., description="Hash of the generating spec")
    kind: Literal["tvarch", "archinf"]
    master_seed: int = Field(..., ge=0, lt=2**64, description="64-bit master seed")
    replicate_count: int = Field(..., ge=1)
    paths: List[np.ndarray] = Field(..., description="Per-replicate arrays of X_t >= 0")
    t_start: int = Field(default=0, description="Time index of the first kept value")
    burn_in: int = Field(..., ge=0)
    truncation_lag: Optional[int] = Field(None, ge=1, description="ARCH(inf) only")

    @property
    def length(self) -> int:
        return int(self.paths[0].size)

    @property
    def sample_size(self) -> int:
        return sum(int(path.size) for path in self.paths)

"""Data schemas for process specs, expansions, bounds and estimates."""

from .innovation import InnovationName, InnovationLaw, InnovationModel
from .process import (
    CoefficientSchedule,
    TvArchSpec,
    TailClass,
    CoefficientRule,
    ArchInfSpec,
    AssumptionClause,
    AssumptionReport,
    PathEnsemble,
)
from .volterra import PastBlock, PqTerms, PsiSequence, TailFunctional
from .density import LipschitzCertificate, TvReport
from .bounds import (
    EtaProblem,
    RateClass,
    TvArchBound,
    ArchInfBound,
    SpectralDecayReport,
    BoundCurve,
    LinearTvTerm,
    PowerTailTerm,
)
from .estimation import JointCellTable, EstimateCurve, CovarianceCurve, DecayFit
from .experiment import ExperimentConfig, CheckRow

__all__ = [
    # Innovation schemas
    "InnovationName",
    "InnovationLaw",
    "InnovationModel",
    # Process schemas
    "CoefficientSchedule",
    "TvArchSpec",
    "TailClass",
    "CoefficientRule",
    "ArchInfSpec",
    "AssumptionClause",
    "AssumptionReport",
    "PathEnsemble",
    # Volterra schemas
    "PastBlock",
    "PqTerms",
    "PsiSequence",
    "TailFunctional",
    # Density schemas
    "LipschitzCertificate",
    "TvReport",
    # Bound schemas
    "EtaProblem",
    "RateClass",
    "TvArchBound",
    "ArchInfBound",
    "SpectralDecayReport",
    "BoundCurve",
    "LinearTvTerm",
    "PowerTailTerm",
    # Estimation schemas
    "JointCellTable",
    "EstimateCurve",
    "CovarianceCurve",
    "DecayFit",
    # Experiment schemas
    "ExperimentConfig",
    "CheckRow",
]

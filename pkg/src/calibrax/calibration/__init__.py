"""Excess risks, exact calibration functions, lower bounds and consistency levels."""

from .bounds import (
    V_MODES,
    PairBoundTerm,
    TreeBoundParams,
    bound_zero_exit,
    iter_pair_terms,
    pair_term,
    projected_loss,
    theorem1_bound,
    tree_bound_closed,
    tree_bound_params,
    xi_ij,
)
from .consistency import (
    ConsistencyReport,
    DornCheck,
    consistency_report,
    dorn_certificate_check,
    dorn_point,
    mixture_level,
    pair_qp,
    point_mass_level,
)
from .curves import (
    CalibrationCurve,
    ConsistencyLevelError,
    SampleComplexity,
    convex_minorant,
    dm_constant,
    sample_complexity,
    uniform_grid,
)
from .exact import PairPolicy, SweepResult, calibration_curve, exact_consistency_level, pair_calibration, sweep
from .risks import excess_surrogate, excess_task, optimal_theta, predict
from .symmetry import OutputSymmetry, find_symmetry

__all__ = [
    "V_MODES",
    "CalibrationCurve",
    "ConsistencyLevelError",
    "ConsistencyReport",
    "DornCheck",
    "OutputSymmetry",
    "PairBoundTerm",
    "PairPolicy",
    "SampleComplexity",
    "SweepResult",
    "TreeBoundParams",
    "bound_zero_exit",
    "calibration_curve",
    "consistency_report",
    "convex_minorant",
    "dm_constant",
    "dorn_certificate_check",
    "dorn_point",
    "exact_consistency_level",
    "excess_surrogate",
    "excess_task",
    "find_symmetry",
    "iter_pair_terms",
    "mixture_level",
    "optimal_theta",
    "pair_calibration",
    "pair_qp",
    "pair_term",
    "point_mass_level",
    "predict",
    "projected_loss",
    "sample_complexity",
    "sweep",
    "theorem1_bound",
    "tree_bound_closed",
    "tree_bound_params",
    "uniform_grid",
    "xi_ij",
]

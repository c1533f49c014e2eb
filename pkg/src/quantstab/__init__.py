"""Stabilization of uncertain autoregressive plants over finite-rate channels.

The package covers the full workflow: interval arithmetic for set-valued
estimation, nonuniform quantizer synthesis, necessary and sufficient data-rate
bounds, periodic alphabet-size schedules, a verified closed-loop simulator,
and brute-force oracles that cross-check every closed form.
"""

from .intervals import Interval, interval_product, minkowski_sum, width
from .loop import (
    InvariantViolation,
    StepRecord,
    Trajectory,
    control,
    predict,
    run_closed_loop,
    sigma_envelope,
)
from .oracle import (
    GridSearchResult,
    exhaustive_encode_decode,
    grid_optimal_boundaries,
    verify_equalization,
    verify_relaxation_kkt,
)
from .plant import (
    PlantInstance,
    UncertainPlant,
    is_admissible,
    pole_product_magnitude,
    sample_instance,
    step,
)
from .quantizer import (
    ExpansionProfile,
    QuantizerSpec,
    SaturationError,
    cells,
    coefficient_expansion_rates,
    decode,
    encode,
    expansion_profile,
    optimal_boundaries,
    quantizer_for,
    uniform_boundaries,
    v_rate,
)
from .rates import (
    INFEASIBLE,
    ComparisonBounds,
    Decomposition,
    HMatrix,
    RelaxedRateSolution,
    Schedule,
    ScheduleSearchResult,
    StabilityTest,
    comparison_bounds,
    conservative_known_plant_rate,
    interval_decomposition,
    min_sufficient_N,
    necessary_rate,
    periodic_sufficient_test,
    relaxed_min_rate,
    schedule_quantizers,
    search_periodic_schedule,
    spectral_radius,
    sufficient_test,
)

__version__ = "0.1.0"

__all__ = [
    "INFEASIBLE",
    "ComparisonBounds",
    "Decomposition",
    "ExpansionProfile",
    "GridSearchResult",
    "HMatrix",
    "Interval",
    "InvariantViolation",
    "PlantInstance",
    "QuantizerSpec",
    "RelaxedRateSolution",
    "SaturationError",
    "Schedule",
    "ScheduleSearchResult",
    "StabilityTest",
    "StepRecord",
    "Trajectory",
    "UncertainPlant",
    "cells",
    "coefficient_expansion_rates",
    "comparison_bounds",
    "conservative_known_plant_rate",
    "control",
    "decode",
    "encode",
    "exhaustive_encode_decode",
    "expansion_profile",
    "grid_optimal_boundaries",
    "interval_decomposition",
    "interval_product",
    "is_admissible",
    "min_sufficient_N",
    "minkowski_sum",
    "necessary_rate",
    "optimal_boundaries",
    "periodic_sufficient_test",
    "pole_product_magnitude",
    "predict",
    "quantizer_for",
    "relaxed_min_rate",
    "run_closed_loop",
    "sample_instance",
    "schedule_quantizers",
    "search_periodic_schedule",
    "sigma_envelope",
    "spectral_radius",
    "step",
    "sufficient_test",
    "uniform_boundaries",
    "v_rate",
    "verify_equalization",
    "verify_relaxation_kkt",
    "width",
]

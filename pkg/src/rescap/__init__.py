"""Resilience capacity learning and prognostics for manufacturing lines.

The package models a multi-stage line, decides by linear programming whether
a degradation vector still lets every demand be met, learns the satisfiable
region from a limited budget of such oracle answers, and turns degradation
forecasts into remaining-useful-life distributions against that region.
"""

from .forest import (ForestHyperparams, ForestModel, fit_forest,
                     forest_from_json, forest_to_json, predict_proba)
from .learner import (BaselineModel, ClassificationReport, ClassMetrics,
                      EntropyQuery, LabeledSample, SampleSet, VolumeEstimate,
                      active_learn, balance_samples, baseline_build,
                      baseline_from_json, baseline_to_json, binary_entropy,
                      classification_report, dominance_label, entropy_argmax,
                      estimate_volume, forest_classifier, generate_test_set,
                      oracle_classifier, samples_from_csv, samples_to_csv,
                      train_forest)
from .line import (LineConfig, MachineSpec, PartSpec, QueueState,
                   effective_rate, expand_virtual_machines, line_from_json,
                   line_to_json, make_analytic2, make_desk6, preset,
                   step_queues, validate_degradation, validate_line)
from .oracle import (BudgetExhausted, FeasibilityLabel, OracleBudget,
                     OriginInfeasible, check_feasibility, extend_ray,
                     maximize_direction)
from .phm import (DegradationParams, ForecastPosterior, NotEnoughData,
                  RulRow, RulSummary, SingularDesign, clip_onset,
                  crossing_time, fit_forecast, rul_over_time, rul_pmf,
                  rul_summary, sample_trajectories, simulate_observations,
                  true_degradation)
from .problems import (StructuralInfeasibility, build_aggregated_lp,
                       build_axis_boundary_lp, build_horizon_milp,
                       build_ray_extension_lp, check_structure,
                       horizon_dimensions, simulate_schedule)
from .simplex import (LpInputError, LpProblem, LpSolution, TripletMatrix,
                      make_problem, problem_from_json, problem_to_json,
                      solution_residual, solve)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Bounds on the predictive performance of risk scores under selectively observed outcomes."""

from .bounds_functions import BoundingSpec, lse, lse_grad, pseudo_bound_terms
from .core_data import (Dataset, FoldAssignment, PerformanceSpec, Record, ValidationError,
                        beta_terms, split_folds, validate_dataset)
from .decisions import UtilitySpec, maxmin_rule, regret, welfare_bounds
from .mu_bounds_learner import (BoundRegressors, SmootherConfig, imse, learn_mu_bounds,
                                oracle_fit, plugin_fit)
from .nuisance import LearnerConfig, NuisanceBundle, cross_fit_nuisances, fit_learner
from .overall_perf import (BoundsEstimate, estimate_overall_bounds,
                           estimate_overall_disparity_bounds)
from .positive_class import (estimate_negative_class_bounds, estimate_positive_class_bounds,
                             positive_class_disparity_bounds, solve_fold_lfp)

__version__ = "0.1.0"

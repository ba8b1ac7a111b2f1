"""Exact nonlinear expectations on finite scenario trees."""

from .expectations import (AmbiguitySet, DualPenaltyResult, PenaltyTable,
                           PenaltyViolation, convex_expectation, dual_penalty,
                           entropic_expectation, hull_membership,
                           kl_divergence, sublinear_expectation)
from .families import (CheckReport, EntropicFamily, LinearFamily,
                       PenaltyFamily, SublinearFamily, check_stability,
                       marginal_uniqueness_check, separating_functional,
                       shift_homogeneity_residual, tower_residual)
from .fixtures import (iid_band_ambiguity, non_stable_fixture, product_measure,
                       random_measure, random_stable_ambiguity, random_tree,
                       rectangular_ambiguity, two_step_binary_tree)
from .measures import (PathMeasure, conditional_expectation, dirac,
                       expected_value, paste_measures, regular_conditional,
                       uniform)
from .tree import (CylinderFunctional, Functional, ScenarioTree,
                   constant_functional)

__all__ = [name for name in dir() if not name.startswith("_")]

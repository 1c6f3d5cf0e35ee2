"""Numerical laboratory for heat flow on weighted-graph approximations of
fractal metric measure spaces: reference energies, skew perturbations,
cutoff constructions, heat propagators, and direct measurement of the
geometric and parabolic inequalities they satisfy."""

from .scaling import ScalingFunction, verify_psi, GASKET_WALK_EXPONENT
from .space import (MetricMeasureGraph, SpaceSpec, BallFamily, build_space,
                    parse_space_spec, gasket_graph, path_graph, grid_graph,
                    certify_vd, certify_rvd)
from .forms import (ReferenceForm, HarmonicProfile, chain_rule_defect,
                    harmonic_profile, certify_profile_constants)
from .nonsym import (FormSchedule, Window, build_nonsymmetric,
                     time_dependent_schedule, decompose, l_product_defect,
                     l_chain_defect, verify_assumption0, verify_skew_assumptions)
from .cutoff import (CutoffFunction, plateau_cutoff, layered_cutoff,
                     measure_layer_constants, certify_csa, exp_cutoff_check)
from .poincare import (certify_pi, certify_weighted_pi, certify_pseudo_pi,
                       certify_sobolev, rayleigh_sweep_pi)
from .propagator import (SolverConfig, Trajectory, KernelMatrix, solve_ivp,
                         transition, adjoint_transition, kernel,
                         check_chapman_kolmogorov, check_positivity,
                         steklov_average, check_max_principle,
                         check_super_mean_value, check_caloric_axioms,
                         subsolution_defect)
from .harnack import (Cylinder, HarnackCylinders, make_cylinders,
                      energy_estimate_check, mve_check, log_lemma_stat,
                      phi_estimate, holder_estimate, bombieri_parameters)
from .hke import (RateFunction, rate, davies_gaffney_check, upper_hke_fit,
                  lower_hke_fit, gaussian_slope_diagnostic)
from .families import TestFamily, default_family, nonnegative_family
from .report import CertReport, ReportBundle, append_ledger, suite_csv

__version__ = "0.1.0"

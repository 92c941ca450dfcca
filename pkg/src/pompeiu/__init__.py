"""Cauchy-Green integral operators on the disk and Picard fixed-point solvers
for nonlinear systems d^mu dbar^nu u = a(z, u, D^1 u, ..., D^m u)."""

from .grid import DiscGrid, ScalarField, build_grid, integrate, sample
from .holder import JetField, NormReport, jet_norm, level_norm, norms, taylor_subtract
from .operators import (apply_dk_Sb, apply_highT, apply_S, apply_Sb, apply_Sbar,
                        apply_Sbar_b, apply_T, apply_T2, apply_Tbar)
from .words import compose_green, reduce_word
from .constants import (base_constants, check_theorem_conditions, delta_eta_ledger,
                        envelope_bounds, evaluate_point, feasibility_search,
                        operator_gain, EnvelopeSet)
from .solver import (EnvelopeEscape, JetSpec, RhsSystem, SolveOptions, SolveReport,
                     make_seed, residual, solve, solve_holomorphic, solve_real,
                     theta_step)
from .problems import (MetricChart, builtin, chart_from_csv, christoffel,
                       cp_coefficients, flat_chart, harmonic_map_spec,
                       harmonic_map_system, kobayashi_upper_bound, real_to_complex,
                       sphere_chart)

__version__ = "0.1.0"

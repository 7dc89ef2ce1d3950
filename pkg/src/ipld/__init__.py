"""Inexact interior-point Lagrangian decomposition solver.

Solves separable constrained composite convex problems

    min_x  g(x) + phi(A x)   over  x in K = K_1 x ... x K_N

by smoothing the Lagrangian dual with self-concordant barriers of the K_i,
following the central path with geometrically decreasing penalty, and taking
inexact scaled proximal-Newton steps on the smoothed dual. Slave
subproblems are solved blockwise to controlled accuracy; the resulting
inexact oracles keep the iterates in a certified neighborhood of the path.
"""

from .applications import (DslData, Network, NumData, bfs_ball,
                           build_dsl_instance, build_num_instance,
                           generate_dsl, generate_num, shortest_paths,
                           synthetic_network)
from .blocks import (BoxBarrierFamily, CallbackBlock, HalfIntervalBarrierFamily,
                     QuadraticFamily, SmoothFamily)
from .chambolle_pock import CpProblem, CpResult, build_cp_num, cp_solve
from .composites import (BoxWindowComposite, CompositeTerm, PointComposite,
                         UpperBoundComposite, ZeroComposite)
from .io import (RunResult, parse_dsl_data, parse_edge_list, read_result,
                 read_trace, write_dsl_data, write_result, write_trace)
from .master import (MasterNonConvergence, MasterStepResult, gradient_mapping,
                     scaled_prox)
from .model import (BlockGroup, PrimalPoint, ProblemInstance, PsiHessian,
                    evaluate_psi, primal_dual_norm, primal_local_norm,
                    validate_instance)
from .oracle import OracleEval, build_oracle, dual_norm, oracle_error_suite
from .pathfollow import (Certificate, IterationRecord, Phase1Result,
                         SolveResult, SolveStatus, SolverConfig, certify,
                         neighborhood_diagnostics, phase1, solve)
from .scalars import (GscParams, c_nu, gsc_convert, jmax_bound, kmax_bound,
                      lemma4_region_check, mt_coeff, omega, omega_star,
                      phase1_stepsize, sigma_rule)
from .slave import SlaveResult, solve_slave, verify_delta_bound

__version__ = "0.1.0"

"""SDP-based higher-order Newton methods.

Each iteration regularizes the order-``d`` Taylor expansion into an
sos-convex polynomial (one semidefinite program) and moves to its
minimizer (a second, moment-relaxation program).
"""

from .conicsolve import SdpProblem, SdpSolution, SolverOptions, Status, solve
from .hon import (StepReport, Trace, empirical_order, minimize, minimize_classical,
                  minimize_global, step_global, step_order_d)
from .jets import ATAN1, BEALE, SQRT1, FunctionOracle, taylor_expand
from .polycore import Polynomial, monomial_basis
from .sosform import (SosConvexCertificate, lasserre_minimize, min_t, min_t_bar,
                      verify_certificate)

__all__ = [
    "ATAN1", "BEALE", "SQRT1", "FunctionOracle", "Polynomial", "SdpProblem", "SdpSolution",
    "SolverOptions", "SosConvexCertificate", "Status", "StepReport", "Trace",
    "empirical_order", "lasserre_minimize", "min_t", "min_t_bar", "minimize",
    "minimize_classical", "minimize_global", "monomial_basis", "solve", "step_global",
    "step_order_d", "taylor_expand", "verify_certificate",
]

"""Self-similar potential-flow shock reflection toolkit.

Exact shock-polar analysis, self-similar background states and critical
angles, and a shock-fitting solver for the transonic free boundary problem,
with an admissibility verification suite and a CLI.
"""

from .fbp_solver import (
    SolutionField,
    SolveReport,
    exact_normal_solution,
    reconstruct_phi,
    solve_fbp,
)
from .gas_model import GasModel
from .geometry_map import ExtensionOperator, MappedDomain, ShockGraph
from .selfsim_states import (
    ConfigGeometry,
    beta_detach,
    beta_sonic,
    landmarks,
    normal_state,
    oblique_state,
)
from .steady_polar import IncomingSteady, ShockPolarCurve, mach_jump
from .verify import AdmissibilityReport, CheckResult, verify_solution

__all__ = [
    "AdmissibilityReport",
    "CheckResult",
    "ConfigGeometry",
    "ExtensionOperator",
    "GasModel",
    "IncomingSteady",
    "MappedDomain",
    "ShockGraph",
    "ShockPolarCurve",
    "SolutionField",
    "SolveReport",
    "beta_detach",
    "beta_sonic",
    "exact_normal_solution",
    "landmarks",
    "mach_jump",
    "normal_state",
    "oblique_state",
    "reconstruct_phi",
    "solve_fbp",
    "verify_solution",
]
__version__ = "0.1.0"

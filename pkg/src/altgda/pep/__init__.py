"""Performance estimation of AltGDA and SimGDA as a Gram-matrix SDP."""
from .basis import PepSpec, SelectionBasis, build_selection_basis
from .sdp import SdpInstance, SdpSolution, assemble_pep_sdp, verify_certificate
from .sdpa import SdpaProblem, export_sdpa, instance_to_sdpa, read_solution
from .solver import ExternalSolver, bundled_solver, pep_value, resolve_solver, solve_pep

__all__ = ["PepSpec", "SelectionBasis", "build_selection_basis", "SdpInstance", "SdpSolution",
           "assemble_pep_sdp", "verify_certificate", "SdpaProblem", "export_sdpa",
           "instance_to_sdpa", "read_solution", "ExternalSolver", "bundled_solver", "pep_value",
           "resolve_solver", "solve_pep"]

"""External SDP solver contract and the verified worst-case value.

A solver is any command that accepts ``<cmd> problem.dat-s output`` and
writes either a CSDP solution file or SDPA output with a ``yMat`` section.
The command comes from the ``PEP_SDP_SOLVER`` environment variable, which
takes precedence over an explicitly configured command.
"""
from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

from ..errors import CertificateRejected, ConfigurationError, SolverError
from .basis import PepSpec
from .sdp import CERT_TOL, SdpSolution, assemble_pep_sdp, lift_grams, reduce_instance, verify_certificate
from .sdpa import export_sdpa, instance_to_sdpa, read_solution

ENV_VAR = "PEP_SDP_SOLVER"
BUNDLED_ADAPTER = (sys.executable, "-m", "altgda.pep.conic_adapter")


@dataclass(frozen=True)
class ExternalSolver:
    command: tuple
    timeout: float = 3600.0

    @classmethod
    def from_string(cls, cmd: str, timeout: float = 3600.0) -> "ExternalSolver":
        return cls(tuple(shlex.split(cmd)), timeout)

    def describe(self) -> str:
        return " ".join(shlex.quote(c) for c in self.command)


def bundled_solver(timeout: float = 3600.0) -> ExternalSolver:
    """The Clarabel-backed adapter shipped with the package."""
    return ExternalSolver(BUNDLED_ADAPTER, timeout)


def resolve_solver(explicit: Optional[str] = None, timeout: float = 3600.0) -> ExternalSolver:
    """Pick the solver command: environment first, then the explicit value.

    The word ``bundled`` selects the Clarabel adapter shipped here.
    """
    cmd = os.environ.get(ENV_VAR) or explicit
    if cmd == "bundled":
        return bundled_solver(timeout)
    if not cmd:
        raise ConfigurationError(
            f"no SDP solver configured; set {ENV_VAR} or pass --solver, for example "
            "--solver bundled (Clarabel adapter shipped with this package) "
            "or --solver csdp")
    return ExternalSolver.from_string(cmd, timeout)


def solve_pep(spec: PepSpec, solver: ExternalSolver, tol: float = CERT_TOL,
                keep_dir: Optional[str] = None, reduce: bool = True) -> SdpSolution:
    """Assemble, export, solve and verify; returns the accepted solution.

    With ``reduce`` (the default) the solver sees the instance without the
    vacuous slots, which it handles far more reliably.  The returned Grams are
    always lifted back and verified against the full instance.
    """
    instance = assemble_pep_sdp(spec)
    target, keep = reduce_instance(instance) if reduce else (instance, None)
    prob, _ = instance_to_sdpa(target)
    with tempfile.TemporaryDirectory(prefix="pep_") as scratch:
        work = keep_dir or scratch
        problem = os.path.join(work, "problem.dat-s")
        output = os.path.join(work, "solution.out")
        export_sdpa(target, problem)
        try:
            proc = subprocess.run(list(solver.command) + [problem, output], capture_output=True,
                                  text=True, timeout=solver.timeout)
        except FileNotFoundError as exc:
            raise SolverError(f"solver command not found: {solver.describe()}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SolverError(f"solver timed out after {solver.timeout} s",
                              (exc.stdout or "") if isinstance(exc.stdout, str) else "") from exc
        log = (proc.stdout or "") + (proc.stderr or "")
        if not os.path.exists(output):
            raise SolverError(f"solver exited with code {proc.returncode} and wrote no output", log)
        try:
            mats = read_solution(output, prob.blocks)
        except (ValueError, IndexError) as exc:
            raise SolverError(f"unreadable solver output: {exc}", log) from exc
    gx, gy = mats[0], mats[1]
    if keep is not None:
        gx, gy = lift_grams(instance.gram_order, keep, gx, gy)
    sol = verify_certificate(instance, gx, gy, tol)
    if not sol.accepted:
        raise CertificateRejected(f"solution failed verification: {sol.summary()}", sol)
    return sol


def pep_value(spec: PepSpec, solver: ExternalSolver, tol: float = CERT_TOL) -> float:
    """Verified worst-case averaged gap after ``T`` steps at stepsize ``eta``."""
    return solve_pep(spec, solver, tol).objective_value


@dataclass(frozen=True)
class PepEvaluator:
    """Picklable ``eta -> pep_value`` map for the stepsize search."""

    T: int
    algorithm: str
    solver: ExternalSolver
    tol: float = CERT_TOL

    def __call__(self, eta: float) -> float:
        return pep_value(PepSpec(self.algorithm, self.T, float(eta)), self.solver, self.tol)


def make_evaluator(T: int, algorithm: str, solver: ExternalSolver, tol: float = CERT_TOL) -> PepEvaluator:
    return PepEvaluator(int(T), algorithm, solver, tol)

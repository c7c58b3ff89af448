"""Command-line bridge from SDPA files to the Clarabel conic solver.

Usage: ``python -m altgda.pep.conic_adapter problem.dat-s output``.

Reads an SDPA sparse problem, solves it with Clarabel and writes the result
in the CSDP solution layout (first line the equality multipliers, then
``2 blk i j value`` entries of the primal matrix), so that it can stand in
for any solver following the ``<cmd> <problem> <output>`` contract.
"""
from __future__ import annotations

import sys

import numpy as np
import scipy.sparse as sp

from .sdpa import SdpaProblem

SQRT2 = np.sqrt(2.0)


def _layout(blocks):
    """Offsets of each block inside the stacked svec variable."""
    offs, pos = [], 0
    for b in blocks:
        offs.append(pos)
        pos += b * (b + 1) // 2 if b > 0 else -b
    return offs, pos


def _svec_index(blocks, offs, blk, i, j):
    """Position and svec scale of entry ``(i, j)`` (0-based, any order)."""
    b = np.asarray(blocks)[blk]
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    mat = b > 0
    pos = np.where(mat, np.asarray(offs)[blk] + hi * (hi + 1) // 2 + lo, np.asarray(offs)[blk] + i)
    scale = np.where(mat & (lo != hi), SQRT2, 1.0)
    return pos, scale


def solve_sdpa(prob: SdpaProblem, verbose: bool = False, tol: float = 1e-9):
    import clarabel

    blocks = prob.blocks
    offs, nvar = _layout(blocks)
    blk = prob.blk - 1
    pos, scale = _svec_index(blocks, offs, blk, prob.row - 1, prob.col - 1)
    coef = prob.val * scale
    obj = prob.mat == 0
    q = np.zeros(nvar)
    np.add.at(q, pos[obj], -coef[obj])
    A_eq = sp.csc_matrix((coef[~obj], (prob.mat[~obj] - 1, pos[~obj])), shape=(prob.m, nvar))
    A = sp.vstack([A_eq, -sp.identity(nvar, format="csc")], format="csc")
    b = np.concatenate([prob.c, np.zeros(nvar)])
    cones = [clarabel.ZeroConeT(prob.m)]
    for bs in blocks:
        cones.append(clarabel.PSDTriangleConeT(bs) if bs > 0 else clarabel.NonnegativeConeT(-bs))
    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = 500
    # The default KKT backend and Ruiz equilibration both stall on these
    # badly scaled instances; qdldl without equilibration converges.
    settings.direct_solve_method = "qdldl"
    settings.equilibrate_enable = False
    P = sp.csc_matrix((nvar, nvar))
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()
    z = np.asarray(sol.x)
    mats = []
    for bs, off in zip(blocks, offs):
        if bs > 0:
            M = np.zeros((bs, bs))
            hi, lo = np.triu_indices(bs)[1], np.triu_indices(bs)[0]
            vals = z[off + hi * (hi + 1) // 2 + lo]
            vals = np.where(hi != lo, vals / SQRT2, vals)
            M[lo, hi] = vals
            M[hi, lo] = vals
            mats.append(M)
        else:
            mats.append(z[off:off - bs].copy())
    return mats, np.asarray(sol.z)[:prob.m], str(sol.status), -float(sol.obj_val)


def write_csdp_solution(path, mats, y) -> None:
    with open(path, "w") as fh:
        fh.write(" ".join(f"{v:.17g}" for v in y) + "\n")
        for b, M in enumerate(mats, start=1):
            if M.ndim == 2:
                i, j = np.triu_indices(M.shape[0])
                vals = M[i, j]
            else:
                i = j = np.arange(M.size)
                vals = M
            nz = vals != 0
            fh.writelines(f"2 {b} {a + 1} {c + 1} {v:.17g}\n"
                          for a, c, v in zip(i[nz].tolist(), j[nz].tolist(), vals[nz].tolist()))


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m altgda.pep.conic_adapter problem.dat-s output", file=sys.stderr)
        return 2
    prob = SdpaProblem.read(argv[0])
    mats, y, status, value = solve_sdpa(prob)
    print(f"status {status}\nobjValPrimal = {value:.12g}")
    write_csdp_solution(argv[1], mats, y)
    return 0 if status in ("Solved", "AlmostSolved") else 1


if __name__ == "__main__":
    sys.exit(main())

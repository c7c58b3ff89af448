"""SDPA sparse format (``.dat-s``) and solver-output readers.

A problem in this format is ``maximize tr(F0 Y)`` subject to
``tr(Fi Y) = ci`` for ``i = 1..mDIM`` and ``Y`` block-diagonal PSD, where a
negative block size denotes a diagonal block.  Only the upper triangle of
each ``Fi`` is listed; the matrix is understood to be symmetric.

The PEP instance is encoded with ``Y = diag(Gx, Gy, S1, S2, s)``: one block
per Gram, one per PSD map (tied to the map by equality rows), and a diagonal
block of slacks turning inequalities into equalities.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import SolverError
from .sdp import SdpInstance


@dataclass(eq=False)
class SdpaProblem:
    """``c``, block sizes and the entry list ``(mat, blk, i, j, value)``, 1-based."""

    c: np.ndarray
    blocks: list
    mat: np.ndarray
    blk: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    @property
    def m(self) -> int:
        return int(self.c.size)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.m}\n{len(self.blocks)}\n")
            fh.write(" ".join(str(int(b)) for b in self.blocks) + "\n")
            fh.write(" ".join(f"{v:.17g}" for v in self.c) + "\n")
            lines = [f"{a} {b} {i} {j} {v:.17g}\n" for a, b, i, j, v in
                     zip(self.mat.tolist(), self.blk.tolist(), self.row.tolist(),
                         self.col.tolist(), self.val.tolist())]
            fh.writelines(lines)

    @classmethod
    def read(cls, path) -> "SdpaProblem":
        with open(path) as fh:
            text = fh.read()
        lines = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in "*\""]
        tok = lambda s: [t for t in re.split(r"[\s,{}()]+", s) if t]
        m = int(tok(lines[0])[0])
        nb = int(tok(lines[1])[0])
        blocks = [int(float(t)) for t in tok(lines[2])[:nb]]
        rest = lines[3:]
        cvals, k = [], 0
        while len(cvals) < m:
            cvals += [float(t) for t in tok(rest[k])]
            k += 1
        body = np.array([tok(ln)[:5] for ln in rest[k:]], dtype=float).reshape(-1, 5)
        return cls(np.array(cvals[:m]), blocks, body[:, 0].astype(int), body[:, 1].astype(int),
                   body[:, 2].astype(int), body[:, 3].astype(int), body[:, 4])


def _upper_entries(rows: sp.csr_matrix, N: int, scale: float = 1.0):
    """Upper-triangle ``(row, i, j, value)`` of symmetric matrices stored as vec rows."""
    coo = rows.tocoo()
    i, j = np.divmod(coo.col, N)
    keep = (i <= j) & (coo.data != 0)
    return coo.row[keep], i[keep] + 1, j[keep] + 1, scale * coo.data[keep]


def instance_to_sdpa(instance: SdpInstance):
    """Encode a PEP instance; returns ``(problem, manifest)``."""
    N = instance.gram_order
    ks = [m.order for m in instance.psd_maps]
    n_in, n_eq = instance.n_ineq, instance.n_eq
    blocks = [N, N] + ks + ([-n_in] if n_in else [])
    slack_blk = len(blocks)
    parts = []
    c = [instance.ineq_rhs, instance.eq_rhs]

    def add(mat_idx, blk, i, j, v):
        parts.append((np.asarray(mat_idx), np.full(len(v), blk), np.asarray(i), np.asarray(j), np.asarray(v)))

    for blk, obj in ((1, instance.obj_x), (2, instance.obj_y)):
        r, i, j, v = _upper_entries(sp.csr_matrix(obj.reshape(1, -1)), N)
        add(np.zeros_like(r), blk, i, j, v)
    offset = 1
    for A, Bm in ((instance.ineq_x, instance.ineq_y), (instance.eq_x, instance.eq_y)):
        for blk, rows in ((1, A), (2, Bm)):
            r, i, j, v = _upper_entries(rows, N)
            add(r + offset, blk, i, j, v)
        offset += A.shape[0]
    if n_in:
        r = np.arange(n_in)
        add(r + 1, slack_blk, r + 1, r + 1, np.ones(n_in))
    map_ranges = []
    for b, pm in enumerate(instance.psd_maps):
        k = pm.order
        a_idx, b_idx = np.triu_indices(k)
        flat = a_idx * k + b_idx
        start = offset
        for blk, rows in ((1, pm.Mx), (2, pm.My)):
            r, i, j, v = _upper_entries(rows[flat], N)
            add(r + offset, blk, i, j, v)
        s_val = np.where(a_idx == b_idx, -1.0, -0.5)
        add(np.arange(flat.size) + offset, 3 + b, a_idx + 1, b_idx + 1, s_val)
        c.append(np.zeros(flat.size))
        offset += flat.size
        map_ranges.append((pm.label, start, offset - 1))
    mat, blk, i, j, v = (np.concatenate(z) for z in zip(*parts))
    order = np.lexsort((j, i, blk, mat))
    prob = SdpaProblem(np.concatenate(c), blocks, mat[order], blk[order], i[order], j[order], v[order])
    spec = instance.spec
    manifest = {
        "algorithm": spec.algorithm, "T": int(spec.T), "eta": float(spec.eta),
        "block_map": {"1": "gram_x", "2": "gram_y",
                      **{str(3 + b): pm.label for b, pm in enumerate(instance.psd_maps)},
                      **({str(slack_blk): "inequality_slack"} if n_in else {})},
        "constraint_map": {"inequalities": [1, n_in], "equalities": [n_in + 1, n_in + n_eq],
                           **{lab: [s, e] for lab, s, e in map_ranges}},
        "objective_sign": 1,
    }
    return prob, manifest


def export_sdpa(instance: SdpInstance, path, manifest_path=None) -> dict:
    """Write the instance to ``path`` and its JSON sidecar next to it."""
    prob, manifest = instance_to_sdpa(instance)
    prob.write(path)
    mpath = manifest_path if manifest_path is not None else str(path) + ".json"
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def read_solution(path, blocks):
    """Read the primal ``Y`` blocks from a CSDP- or SDPA-style output file.

    Returns a list of dense arrays (diagonal blocks as 1-D vectors).
    """
    with open(path) as fh:
        text = fh.read()
    if "yMat" in text:
        return _read_sdpa_output(text, blocks)
    return _read_csdp_solution(text, blocks)


def _empty_blocks(blocks):
    return [np.zeros((b, b)) if b > 0 else np.zeros(-b) for b in blocks]


def _read_csdp_solution(text, blocks):
    out = _empty_blocks(blocks)
    lines = text.strip().splitlines()
    if len(lines) < 2:
        raise SolverError("solution file is empty or truncated", text[:2000])
    for ln in lines[1:]:
        t = ln.split()
        if len(t) != 5 or t[0] != "2":
            continue
        b, i, j, v = int(t[1]) - 1, int(t[2]) - 1, int(t[3]) - 1, float(t[4])
        if blocks[b] > 0:
            out[b][i, j] = v
            out[b][j, i] = v
        else:
            out[b][i] = v
    return out


def _read_sdpa_output(text, blocks):
    seg = text.split("yMat", 1)[1]
    seg = seg[seg.index("{"):]
    depth, end = 0, None
    for k, ch in enumerate(seg):
        depth += ch == "{"
        depth -= ch == "}"
        if depth == 0:
            end = k
            break
    if end is None:
        raise SolverError("unterminated yMat section in solver output", text[:2000])
    nums = [float(t) for t in re.split(r"[\s,{}]+", seg[:end + 1]) if t]
    out, k = [], 0
    for b in blocks:
        size = b * b if b > 0 else -b
        chunk = np.array(nums[k:k + size])
        k += size
        out.append(chunk.reshape(b, b) if b > 0 else chunk)
    return out

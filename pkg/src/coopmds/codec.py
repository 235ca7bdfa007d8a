"""Systematic encoding, erasure decoding from any k columns, and parity
verification.

Every parity constraint couples only the n symbols of one row: row a of a
codeword is a dual-Vandermonde codeword on the points coeff_matrix()[a] with
r parity equations.  Encoding and decoding are therefore one batched
completion call each (l independent r x r solves), and verification is a
powered row-sum sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from coopmds.codespec import CodeSpec
from coopmds.grs import recover_batched


@dataclass(frozen=True)
class VerifyResult:
    """Outcome of a parity sweep.

    When ok is False, (t, row) locate the first failing check in (t, row)
    lexicographic order.
    """

    ok: bool
    t: int | None = None
    row: int | None = None

    def __bool__(self) -> bool:
        return self.ok


class CodewordArray:
    """An l x n array of field symbols, one column per storage node.

    Node i lives in column i-1; rows follow the spec's row-label order.
    Cells are validated against the field range and frozen on construction.
    """

    def __init__(self, spec: CodeSpec, cells: np.ndarray):
        cells = np.array(cells, dtype=np.int64)
        expect = (spec.params.l, spec.params.n)
        if cells.shape != expect:
            raise ValueError(f"cells must have shape {expect}, got {cells.shape}")
        if cells.size and (cells.min() < 0 or cells.max() >= spec.field.order):
            raise ValueError("symbol out of field range")
        cells.setflags(write=False)
        self.spec = spec
        self.cells = cells

    def column(self, node: int) -> np.ndarray:
        if not 1 <= node <= self.spec.params.n:
            raise ValueError(f"node {node} out of range")
        return self.cells[:, node - 1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CodewordArray)
            and self.spec == other.spec
            and np.array_equal(self.cells, other.cells)
        )

    def __repr__(self) -> str:
        return f"CodewordArray({self.spec!r})"


def encode_systematic(spec: CodeSpec, data: np.ndarray) -> CodewordArray:
    """Place data in columns 1..k and solve columns k+1..n row by row."""
    p = spec.params
    data = np.asarray(data, dtype=np.int64)
    if data.shape != (p.l, p.k):
        raise ValueError(f"data must have shape {(p.l, p.k)}, got {data.shape}")
    parity = recover_batched(spec.field, spec.coeff_matrix(), p.r, np.arange(p.k), data)
    return CodewordArray(spec, np.concatenate([data, parity], axis=1))


def decode_from_columns(spec: CodeSpec, available: Mapping[int, np.ndarray]) -> CodewordArray:
    """Rebuild the full array from the first k available columns in ascending
    node order; any further columns are ignored (see verify_parity for
    consistency checking)."""
    p = spec.params
    nodes = sorted(available)
    if len(nodes) < p.k:
        raise ValueError(f"need at least k={p.k} columns, got {len(nodes)}")
    if nodes[0] < 1 or nodes[-1] > p.n:
        raise ValueError("column keys must be node indices in [1, n]")
    use = nodes[: p.k]
    known = np.empty((p.l, p.k), dtype=np.int64)
    for j, node in enumerate(use):
        col = np.asarray(available[node], dtype=np.int64)
        if col.shape != (p.l,):
            raise ValueError(f"column {node} must be a length-{p.l} vector")
        known[:, j] = col
    known_pos = np.asarray(use, dtype=np.int64) - 1
    rest = recover_batched(spec.field, spec.coeff_matrix(), p.r, known_pos, known)
    cells = np.empty((p.l, p.n), dtype=np.int64)
    cells[:, known_pos] = known
    cells[:, np.setdiff1d(np.arange(p.n), known_pos)] = rest
    return CodewordArray(spec, cells)


def verify_parity(codeword: CodewordArray) -> VerifyResult:
    """Evaluate all r*l parity checks; report the first nonzero one."""
    spec = codeword.spec
    field = spec.field
    coeff = spec.coeff_matrix()
    pw = np.ones_like(coeff)
    for t in range(spec.params.r):
        checks = field.sum(field.mul(pw, codeword.cells), axis=1)
        bad = np.nonzero(checks)[0]
        if len(bad):
            return VerifyResult(False, t, int(bad[0]))
        if t + 1 < spec.params.r:
            pw = field.mul(pw, coeff)
    return VerifyResult(True)

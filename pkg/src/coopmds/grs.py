"""Vandermonde solving and the generalized Reed-Solomon erasure kernel.

A vector y of length N is a codeword of the dual-Vandermonde code on distinct
points p_1..p_N with r parity rows when sum_j p_j^t y_j = 0 for t = 0..r-1.
Any N-r coordinates of such a codeword determine the rest: the r unknown
coordinates solve an r x r Vandermonde subsystem.  That completion step is the
single kernel every repair computation reduces to.

Solving is plain Gaussian elimination (r stays single-digit at all supported
scales); ``solve_batched`` runs the same elimination vectorized over a numpy
stack of independent systems, which is what keeps whole-array encode and
repair fast.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from coopmds.field import Field


def _check_distinct(points: Sequence[int]) -> None:
    if len(set(points)) != len(points):
        raise ValueError("points must be pairwise distinct")


def solve_batched(field: Field, mats: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve B independent q x q systems mats[b] @ y[b] = rhs[b] over the field.

    mats has shape (B, q, q) and rhs (B, q); both are left untouched.  Raises
    ValueError if any system is singular.
    """
    mats = np.array(mats, dtype=np.int64)
    rhs = np.array(rhs, dtype=np.int64)
    nsys, q, q2 = mats.shape
    if q != q2 or rhs.shape != (nsys, q):
        raise ValueError("batch shape mismatch")
    if q == 0:
        return rhs
    bidx = np.arange(nsys)
    for col in range(q):
        piv_off = (mats[:, col:, col] != 0).argmax(axis=1)
        piv_row = col + piv_off
        if (mats[bidx, piv_row, col] == 0).any():
            raise ValueError("singular system in batch")
        swap = piv_row != col
        if swap.any():
            tmp = mats[bidx, piv_row].copy()
            mats[bidx, piv_row] = mats[:, col]
            mats[:, col] = tmp
            tmp = rhs[bidx, piv_row].copy()
            rhs[bidx, piv_row] = rhs[:, col]
            rhs[:, col] = tmp
        ip = field.inv(mats[:, col, col])
        mats[:, col, :] = field.mul(mats[:, col, :], ip[:, None])
        rhs[:, col] = field.mul(rhs[:, col], ip)
        fac = mats[:, :, col].copy()
        fac[:, col] = 0
        mats = field.sub(mats, field.mul(fac[:, :, None], mats[:, col : col + 1, :]))
        rhs = field.sub(rhs, field.mul(fac, rhs[:, col][:, None]))
    return rhs


def vandermonde_matrix(field: Field, points: Sequence[int], rows: int) -> np.ndarray:
    """Matrix V with V[t, j] = points[j]^t for t = 0..rows-1 (0^0 = 1)."""
    pts = np.asarray(points, dtype=np.int64)
    out = np.empty((rows, len(points)), dtype=np.int64)
    if rows == 0:
        return out
    row = np.ones(len(points), dtype=np.int64)
    for t in range(rows):
        out[t] = row
        row = field.mul(row, pts)
    return out


def solve_vandermonde(field: Field, points: Sequence[int], rhs: Sequence[int]) -> list[int]:
    """Solve sum_j points[j]^t y_j = rhs[t] for t = 0..q-1."""
    _check_distinct(points)
    if len(rhs) != len(points):
        raise ValueError("rhs length must match point count")
    q = len(points)
    if q == 0:
        return []
    mat = vandermonde_matrix(field, points, q)
    y = solve_batched(field, mat[None, :, :], np.asarray(rhs, dtype=np.int64)[None, :])
    return [int(v) for v in y[0]]


def recover_batched(
    field: Field,
    points: np.ndarray,
    parity: int,
    known_pos: Sequence[int],
    known_vals: np.ndarray,
) -> np.ndarray:
    """Complete B dual-Vandermonde codewords at their unknown coordinates.

    points: (B, N) per-system evaluation points (distinct within each row);
    known_pos: the N-parity coordinate indices shared by all systems;
    known_vals: (B, N-parity) symbols at those coordinates.  Returns (B, parity)
    symbols for the remaining coordinates in ascending position order.
    """
    points = np.asarray(points, dtype=np.int64)
    nsys, npts = points.shape
    known_pos = np.asarray(known_pos, dtype=np.int64)
    if len(known_pos) != npts - parity:
        raise ValueError(f"expected {npts - parity} known coordinates, got {len(known_pos)}")
    if npts - parity < 1:
        raise ValueError("at least one coordinate must be known")
    unknown_pos = np.setdiff1d(np.arange(npts), known_pos)
    if len(unknown_pos) != parity:
        raise ValueError("known positions out of range or repeated")
    known_vals = np.asarray(known_vals, dtype=np.int64)
    if parity == 0:
        return np.empty((nsys, 0), dtype=np.int64)

    mats = np.empty((nsys, parity, parity), dtype=np.int64)
    rhs = np.empty((nsys, parity), dtype=np.int64)
    pw = np.ones_like(points)
    for t in range(parity):
        mats[:, t, :] = pw[:, unknown_pos]
        rhs[:, t] = field.neg(field.sum(field.mul(pw[:, known_pos], known_vals), axis=1))
        if t + 1 < parity:
            pw = field.mul(pw, points)
    return solve_batched(field, mats, rhs)


def grs_erasure_recover(
    field: Field, points: Sequence[int], parity: int, known: Mapping[int, int]
) -> list[int]:
    """Recover the full length-N codeword from N-parity known coordinates.

    ``known`` maps coordinate index (0-based) to symbol; the caller guarantees
    the knowns are consistent with some codeword (no cross-checking here, the
    codec has a separate verifier).
    """
    _check_distinct(points)
    npts = len(points)
    if not (0 <= parity <= npts):
        raise ValueError("parity out of range")
    for pos in known:
        if not 0 <= pos < npts:
            raise ValueError(f"known position {pos} out of range")
    known_pos = sorted(known)
    vals = recover_batched(
        field,
        np.asarray(points, dtype=np.int64)[None, :],
        parity,
        known_pos,
        np.asarray([known[p] for p in known_pos], dtype=np.int64)[None, :],
    )[0]
    out = [0] * npts
    for p in known_pos:
        out[p] = int(known[p])
    unknown_pos = [p for p in range(npts) if p not in known]
    for p, v in zip(unknown_pos, vals):
        out[p] = int(v)
    return out

"""Two-round cooperative repair, the centralized comparison, cut-set bounds,
and bandwidth accounting.

The repair unit is one (instance, class) cell.  An instance pins every row
digit except the A-block of the failed set F; a class b further pins the
block digits at the surviving F-positions to values below s-1.  The s rows
of a cell differ only in failed node i's own digit u, so node i's
coefficients there are s distinct table entries while every other node's
coefficient is constant.  Summing the parity checks over u therefore yields,
for each exponent t, one dual-Vandermonde equation on n+s-1 points: node i's
s entries, one per-node sum for everyone else.  d helper sums are downloaded
(round 1), leaving exactly r = n-k unknowns: the s entries, the h-1 sums
over the other failed columns, and the idle-node sums.  Solving recovers the
entries of B_z plus cross-sums that round 2 turns into the rows with digit
s-1 at another failed position, which completes A.

All of that is index arithmetic against spec.coeff_matrix(): fixed_subset
codes have one instance, any_subset codes one per assignment of the other
blocks, and concatenated codes one per assignment of the other components'
digits as well.  Columns may carry a trailing stripe axis; stripes fold into
the batched solve, which is how whole-file repair stays fast.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from coopmds.codec import CodewordArray
from coopmds.codespec import CodeSpec, InadmissibleError, card_A, subset_rank
from coopmds.grs import recover_batched


# ---- bounds -----------------------------------------------------------------


def _check_bound_params(h: int, d: int, k: int, l: int) -> None:
    if h < 1 or k < 0 or d < k or l < 1:
        raise InadmissibleError(f"inadmissible bound parameters h={h} d={d} k={k} l={l}")


def cutset_centralized(h: int, d: int, k: int, l: int) -> Fraction:
    """Minimum symbol count to rebuild h columns at one data center from d
    helpers: h*d*l/(h+d-k)."""
    _check_bound_params(h, d, k, l)
    return Fraction(h * d * l, h + d - k)


def cutset_cooperative(h: int, d: int, k: int, l: int) -> Fraction:
    """Minimum total symbol count for h new nodes repairing cooperatively
    from d helpers: h*(h+d-1)*l/(h+d-k)."""
    _check_bound_params(h, d, k, l)
    return Fraction(h * (h + d - 1) * l, h + d - k)


# ---- protocol types ---------------------------------------------------------


@dataclass(frozen=True)
class RepairContext:
    """Failed node set F and helper set R, 1-based and disjoint."""

    failed: tuple[int, ...]
    helpers: tuple[int, ...]

    def __post_init__(self):
        f, r = tuple(self.failed), tuple(self.helpers)
        if len(set(f)) != len(f) or len(set(r)) != len(r):
            raise ValueError("duplicate node indices")
        f, r = tuple(sorted(f)), tuple(sorted(r))
        if not f or not r:
            raise ValueError("failed and helper sets must be nonempty")
        if f[0] < 1 or r[0] < 1:
            raise ValueError("node indices are 1-based")
        if set(f) & set(r):
            raise ValueError(f"failed and helper sets overlap: {set(f) & set(r)}")
        object.__setattr__(self, "failed", f)
        object.__setattr__(self, "helpers", r)

    @property
    def h(self) -> int:
        return len(self.failed)

    @property
    def d(self) -> int:
        return len(self.helpers)


@dataclass
class RepairMessage:
    """One protocol message.

    payload[t] is the sum over u of the column symbols at the rows whose
    varied-node block digit is u; tags[t] = (base row, varied node) names the
    u=0 row and the failed node whose digit varies, making each symbol
    self-describing.  Round 1 varies the receiver's digit, round 2 the
    sender's.  A trailing payload axis, when present, spans stripes that
    share tags.
    """

    round: int
    sender: int
    receiver: int
    payload: np.ndarray
    tags: np.ndarray

    def __post_init__(self):
        self.payload = np.asarray(self.payload, dtype=np.int64)
        self.tags = np.asarray(self.tags, dtype=np.int64)
        if self.tags.shape != (self.payload.shape[0], 2):
            raise ValueError("need one (base row, varied node) tag per payload entry")

    def __len__(self) -> int:
        return self.payload.shape[0]

    @property
    def symbols(self) -> int:
        return self.payload.size


class BandwidthLedger:
    """Symbol counts per (round, sender, receiver)."""

    def __init__(self):
        self._counts: dict[tuple[int, int, int], int] = {}

    def add(self, message: RepairMessage) -> None:
        key = (message.round, message.sender, message.receiver)
        self._counts[key] = self._counts.get(key, 0) + message.symbols

    @property
    def total(self) -> int:
        return sum(self._counts.values())

    def round_subtotal(self, rnd: int) -> int:
        return sum(c for (r, _, _), c in self._counts.items() if r == rnd)

    def link_counts(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for (_, snd, rcv), c in self._counts.items():
            out[(snd, rcv)] = out.get((snd, rcv), 0) + c
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, BandwidthLedger) and self._counts == other._counts

    def __repr__(self) -> str:
        return f"BandwidthLedger(total={self.total}, links={len(self.link_counts())})"


def _fraction_json(x: Fraction) -> "int | str":
    return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass
class RepairTranscript:
    """Messages plus accounting for one repair run."""

    mode: str
    messages: tuple[RepairMessage, ...]
    ledger: BandwidthLedger
    cooperative_bound: Fraction
    centralized_bound: Fraction
    stripes: int = 1

    @property
    def bound(self) -> Fraction:
        if self.mode == "cooperative":
            return self.cooperative_bound
        return self.centralized_bound

    @property
    def optimal(self) -> bool:
        return self.ledger.total == self.bound * self.stripes

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "stripes": self.stripes,
            "links": {
                f"{snd}->{rcv}": c for (snd, rcv), c in sorted(self.ledger.link_counts().items())
            },
            "rounds": {"1": self.ledger.round_subtotal(1), "2": self.ledger.round_subtotal(2)},
            "total": self.ledger.total,
            "bounds": {
                "cooperative": _fraction_json(self.cooperative_bound),
                "centralized": _fraction_json(self.centralized_bound),
            },
            "optimal": self.optimal,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


@dataclass
class Round1State:
    """A failed node's private state after its round-1 solve: the B-set rows
    of its own column plus the cross-sum messages owed to the other failed
    nodes."""

    node: int
    column: np.ndarray
    filled: np.ndarray
    outgoing: tuple[RepairMessage, ...]

    def entries(self) -> dict[int, int]:
        rows = np.nonzero(self.filled)[0]
        return {int(rw): int(self.column[rw]) for rw in rows}


# ---- geometry ---------------------------------------------------------------


def _validate_context(spec: CodeSpec, ctx: RepairContext) -> tuple[CodeSpec, int]:
    p = spec.params
    if max(ctx.failed[-1], ctx.helpers[-1]) > p.n:
        raise InadmissibleError(f"node index beyond n={p.n}")
    if ctx.h > p.r:
        raise InadmissibleError(f"cannot repair {ctx.h} failures with r={p.r} parity columns")
    if spec.family == "fixed_subset" and ctx.failed != tuple(range(1, ctx.h + 1)):
        raise InadmissibleError(
            f"fixed_subset specs repair F={{1..h}} only; relabel columns to move "
            f"{set(ctx.failed)} there or use an any_subset spec"
        )
    return spec.component_for(ctx.h, ctx.d)


class _Geometry:
    """Row-index arithmetic for one (spec, ctx): instance bases, per-node
    class/digit tables, and the shared stride of the F-block."""

    def __init__(self, spec: CodeSpec, ctx: RepairContext):
        comp, scale = _validate_context(spec, ctx)
        self.spec, self.ctx, self.comp = spec, ctx, comp
        self.s, self.h = comp.params.s, comp.params.h
        self.ca = card_A(self.h, self.s)
        self.stride = scale * self.ca ** (subset_rank(ctx.failed) - 1)
        l = spec.params.l
        span = self.stride * self.ca
        lo = np.arange(self.stride, dtype=np.int64)
        hi = np.arange(l // span, dtype=np.int64) * span
        self.bases = (hi[:, None] + lo[None, :]).ravel()
        self.ninst = len(self.bases)
        self.ncls = (self.s - 1) ** (self.h - 1)
        self.quota = self.ninst * self.ncls
        self.idle = tuple(
            sorted(set(range(1, spec.params.n + 1)) - set(ctx.failed) - set(ctx.helpers))
        )
        self.coeff = spec.coeff_matrix()
        self._tables: dict[int, np.ndarray] = {}

    def node_table(self, i: int) -> np.ndarray:
        """table[c, u] = A-position of the block with digit u at node i's
        F-position and the class-c digits (all below s-1) elsewhere."""
        if i not in self._tables:
            z = self.ctx.failed.index(i) + 1
            others = [p for p in range(1, self.h + 1) if p != z]
            table = np.empty((self.ncls, self.s), dtype=np.int64)
            block = [0] * self.h
            for c, b in enumerate(itertools.product(range(self.s - 1), repeat=self.h - 1)):
                for pos, digit in zip(others, b):
                    block[pos - 1] = digit
                for u in range(self.s):
                    block[z - 1] = u
                    table[c, u] = self.comp.apos_of(block)
            self._tables[i] = table
        return self._tables[i]

    def cell_rows(self, i: int) -> np.ndarray:
        """Absolute rows of node i's repair cells, shape (ninst, ncls, s)."""
        return self.bases[:, None, None] + self.stride * self.node_table(i)[None, :, :]

    def tag_array(self, i: int) -> np.ndarray:
        base = (self.bases[:, None] + self.stride * self.node_table(i)[None, :, 0]).ravel()
        return np.stack([base, np.full(self.quota, i, dtype=np.int64)], axis=1)


def _as_stack(geom: _Geometry, column: np.ndarray) -> tuple[np.ndarray, int, bool]:
    column = np.asarray(column, dtype=np.int64)
    flat = column.ndim == 1
    l = geom.spec.params.l
    if column.ndim > 2 or column.shape[0] != l:
        raise ValueError(f"column must have {l} rows")
    stacked = column.reshape(l, -1)
    return stacked, stacked.shape[1], flat


def _payload_out(arr: np.ndarray, flat: bool) -> np.ndarray:
    return arr.reshape(arr.shape[0]) if flat and arr.shape[1] == 1 else arr


# ---- round 1 ----------------------------------------------------------------


def _helper_message(geom: _Geometry, helper: int, failed: int, column: np.ndarray) -> RepairMessage:
    col, _, flat = _as_stack(geom, column)
    sums = geom.spec.field.sum(col[geom.cell_rows(failed)], axis=2)
    payload = _payload_out(sums.reshape(geom.quota, -1), flat)
    return RepairMessage(1, helper, failed, payload, geom.tag_array(failed))


def round1_helper_payload(
    spec: CodeSpec, ctx: RepairContext, helper: int, failed: int, column: np.ndarray
) -> RepairMessage:
    """The round-1 download from one helper for one failed node: per repair
    cell, the sum of the helper's symbols over the failed node's digit."""
    if helper not in ctx.helpers:
        raise ValueError(f"node {helper} is not a helper in this context")
    if failed not in ctx.failed:
        raise ValueError(f"node {failed} is not failed in this context")
    return _helper_message(_Geometry(spec, ctx), helper, failed, column)


def _index_payloads(
    geom: _Geometry, failed: int, payloads: "Iterable[RepairMessage] | Mapping[int, RepairMessage]"
) -> dict[int, np.ndarray]:
    msgs = payloads.values() if isinstance(payloads, Mapping) else payloads
    expect_tags = geom.tag_array(failed)
    by_sender: dict[int, np.ndarray] = {}
    for msg in msgs:
        if msg.round != 1 or msg.receiver != failed:
            raise ValueError(f"message {msg.round}:{msg.sender}->{msg.receiver} is not a round-1 "
                             f"payload for node {failed}")
        if msg.sender in by_sender:
            raise ValueError(f"duplicate payload from helper {msg.sender}")
        if not np.array_equal(msg.tags, expect_tags):
            raise ValueError(f"payload tags from helper {msg.sender} do not match the context")
        by_sender[msg.sender] = msg.payload.reshape(geom.quota, -1)
    if tuple(sorted(by_sender)) != geom.ctx.helpers:
        raise ValueError(f"need payloads from helpers {geom.ctx.helpers}, got {sorted(by_sender)}")
    return by_sender


def _solve_node(geom: _Geometry, i: int, by_sender: dict[int, np.ndarray], flat: bool) -> Round1State:
    spec, field, ctx = geom.spec, geom.spec.field, geom.ctx
    s = geom.s
    cross = [ip for ip in ctx.failed if ip != i]
    table = geom.node_table(i)
    npts = s + len(cross) + len(geom.idle) + ctx.d
    assert npts - ctx.d == spec.params.r

    pts = np.empty((geom.ninst, geom.ncls, npts), dtype=np.int64)
    cls_base = geom.bases[:, None] + geom.stride * table[None, :, 0]
    pts[:, :, :s] = geom.coeff[geom.bases[:, None] + geom.stride * table[None, 0, :], i - 1][
        :, None, :
    ]
    for idx, ip in enumerate(cross):
        pts[:, :, s + idx] = geom.coeff[cls_base, ip - 1]
    for idx, j in enumerate(geom.idle + ctx.helpers):
        pts[:, :, s + len(cross) + idx] = geom.coeff[geom.bases, j - 1][:, None]

    width = by_sender[ctx.helpers[0]].shape[1]
    pts = pts.reshape(geom.quota, npts)
    if width > 1:
        pts = np.repeat(pts, width, axis=0)
    known = np.stack([by_sender[j].reshape(-1) for j in ctx.helpers], axis=1)
    vals = recover_batched(field, pts, spec.params.r, np.arange(npts - ctx.d, npts), known)

    l = spec.params.l
    column = np.zeros((l, width), dtype=np.int64)
    filled = np.zeros(l, dtype=bool)
    rows = geom.cell_rows(i)
    column[rows] = np.moveaxis(vals[:, :s].reshape(geom.ninst, geom.ncls, width, s), 3, 2)
    filled[rows.ravel()] = True
    tags = geom.tag_array(i)
    outgoing = tuple(
        RepairMessage(2, i, ip, _payload_out(vals[:, s + idx].reshape(geom.quota, width), flat), tags)
        for idx, ip in enumerate(cross)
    )
    return Round1State(i, column.reshape(l) if flat and width == 1 else column, filled, outgoing)


def round1_solve(
    spec: CodeSpec,
    ctx: RepairContext,
    failed: int,
    payloads: "Iterable[RepairMessage] | Mapping[int, RepairMessage]",
) -> Round1State:
    """Solve the per-cell (n+s-1)-point systems from the d helper payloads.

    Recovers the failed node's B-set entries (own digit anywhere, other
    F-digits below s-1) and the cross-sums for round 2; idle-node sums are
    solved and discarded.
    """
    if failed not in ctx.failed:
        raise ValueError(f"node {failed} is not failed in this context")
    geom = _Geometry(spec, ctx)
    by_sender = _index_payloads(geom, failed, payloads)
    flat = all(p.shape[1] == 1 for p in by_sender.values())
    return _solve_node(geom, failed, by_sender, flat)


# ---- round 2 ----------------------------------------------------------------


def _finish_column(
    geom: _Geometry, i: int, state: Round1State, received: Iterable[RepairMessage]
) -> np.ndarray:
    field = geom.spec.field
    expect = [ip for ip in geom.ctx.failed if ip != i]
    by_sender: dict[int, RepairMessage] = {}
    for msg in received:
        if msg.round != 2 or msg.receiver != i:
            raise ValueError(f"message {msg.round}:{msg.sender}->{msg.receiver} is not a round-2 "
                             f"cross-sum for node {i}")
        if msg.sender in by_sender:
            raise ValueError(f"duplicate round-2 message from node {msg.sender}")
        by_sender[msg.sender] = msg
    if sorted(by_sender) != expect:
        raise ValueError(f"need round-2 messages from {expect}, got {sorted(by_sender)}")

    l = geom.spec.params.l
    column = state.column.reshape(l, -1).copy()
    filled = state.filled.copy()
    s, ca, stride = geom.s, geom.ca, geom.stride
    for ip in expect:
        msg = by_sender[ip]
        table = geom.node_table(ip)
        inv = np.full(ca, -1, dtype=np.int64)
        inv[table[:, 0]] = np.arange(geom.ncls)
        if (msg.tags[:, 1] != ip).any():
            raise ValueError(f"round-2 tags from node {ip} vary the wrong node")
        base = msg.tags[:, 0]
        cls = inv[(base // stride) % ca]
        if (cls < 0).any():
            raise ValueError(f"round-2 tags from node {ip} are not class bases")
        acc = msg.payload.reshape(len(base), -1)
        for u in range(s - 1):
            rows_u = base + stride * (table[cls, u] - table[cls, 0])
            if not filled[rows_u].all():
                raise ValueError("round-1 state is missing entries the exchange relies on")
            acc = field.sub(acc, column[rows_u])
        target = base + stride * (table[cls, s - 1] - table[cls, 0])
        column[target] = acc
        filled[target] = True
    if not filled.all():
        raise ValueError("repair incomplete: rows remain uncovered")
    return column.reshape(state.column.shape)


def round2_exchange_and_finish(
    spec: CodeSpec,
    ctx: RepairContext,
    failed: int,
    state: Round1State,
    received: Iterable[RepairMessage],
) -> np.ndarray:
    """Fold the cross-sums from the other failed nodes into the round-1
    state: subtracting the s-1 already-known entries of each sum isolates the
    row with digit s-1 at the sender's position, completing the column."""
    geom = _Geometry(spec, ctx)
    if failed != state.node:
        raise ValueError("state belongs to a different node")
    return _finish_column(geom, failed, state, received)


# ---- full protocol ----------------------------------------------------------


def _run_rounds(
    geom: _Geometry, helper_columns: Mapping[int, np.ndarray], *, meter_round2: bool
) -> tuple[dict[int, np.ndarray], list[RepairMessage], BandwidthLedger]:
    ctx = geom.ctx
    ledger = BandwidthLedger()
    messages: list[RepairMessage] = []
    inbox1: dict[int, list[RepairMessage]] = {i: [] for i in ctx.failed}
    for j in ctx.helpers:
        for i in ctx.failed:
            msg = _helper_message(geom, j, i, helper_columns[j])
            inbox1[i].append(msg)
            ledger.add(msg)
            messages.append(msg)
    states = {}
    for i in ctx.failed:
        by_sender = _index_payloads(geom, i, inbox1[i])
        flat = all(p.shape[1] == 1 for p in by_sender.values())
        states[i] = _solve_node(geom, i, by_sender, flat)
    inbox2: dict[int, list[RepairMessage]] = {i: [] for i in ctx.failed}
    for i in ctx.failed:
        for msg in states[i].outgoing:
            inbox2[msg.receiver].append(msg)
            if meter_round2:
                ledger.add(msg)
                messages.append(msg)
    restored = {i: _finish_column(geom, i, states[i], inbox2[i]) for i in ctx.failed}
    messages.sort(key=lambda m: (m.round, m.sender, m.receiver))
    return restored, messages, ledger


def _bounds(spec: CodeSpec, ctx: RepairContext) -> tuple[Fraction, Fraction]:
    k, l = spec.params.k, spec.params.l
    return cutset_cooperative(ctx.h, ctx.d, k, l), cutset_centralized(ctx.h, ctx.d, k, l)


def repair_columns(
    spec: CodeSpec,
    ctx: RepairContext,
    helper_columns: Mapping[int, np.ndarray],
    *,
    mode: str = "cooperative",
) -> tuple[dict[int, np.ndarray], RepairTranscript]:
    """Run the protocol on raw columns (each (l,) or (l, stripes)) and return
    the restored failed columns plus a transcript.

    In centralized mode the round-2 arithmetic happens at the pooling point,
    so only round-1 messages are sent or metered.
    """
    if mode not in ("cooperative", "centralized"):
        raise ValueError(f"unknown mode {mode!r}")
    geom = _Geometry(spec, ctx)
    if sorted(helper_columns) != list(ctx.helpers):
        raise ValueError(f"need columns for helpers {ctx.helpers}, got {sorted(helper_columns)}")
    restored, messages, ledger = _run_rounds(
        geom, helper_columns, meter_round2=(mode == "cooperative")
    )
    coop, cent = _bounds(spec, ctx)
    widths = {np.asarray(c).reshape(spec.params.l, -1).shape[1] for c in helper_columns.values()}
    transcript = RepairTranscript(mode, tuple(messages), ledger, coop, cent, stripes=max(widths))
    return restored, transcript


def _repair_array(
    spec: CodeSpec, damaged: CodewordArray, ctx: RepairContext, mode: str
) -> tuple[CodewordArray, RepairTranscript]:
    if damaged.spec != spec:
        raise ValueError("codeword array belongs to a different spec")
    _validate_context(spec, ctx)
    helper_columns = {j: damaged.cells[:, j - 1] for j in ctx.helpers}
    restored, transcript = repair_columns(spec, ctx, helper_columns, mode=mode)
    cells = damaged.cells.copy()
    for i, col in restored.items():
        cells[:, i - 1] = col
    return CodewordArray(spec, cells), transcript


def cooperative_repair(
    spec: CodeSpec, damaged: CodewordArray, ctx: RepairContext
) -> tuple[CodewordArray, RepairTranscript]:
    """Repair the erased columns F of damaged (whose F-columns are ignored)
    using the two-round protocol; the ledger meets the cooperative cut-set
    bound exactly and every ordered link carries l/(h+d-k) symbols."""
    return _repair_array(spec, damaged, ctx, "cooperative")


def centralized_repair_from_round1(
    spec: CodeSpec, damaged: CodewordArray, ctx: RepairContext
) -> tuple[CodewordArray, RepairTranscript]:
    """Rebuild all failed columns from the round-1 payload multiset alone,
    pooled at one point; traffic meets the centralized cut-set bound."""
    return _repair_array(spec, damaged, ctx, "centralized")

"""Code family descriptors: index sets, subset ranking, masks, λ tables.

Two array-code families are built here, plus their concatenations:

* ``fixed_subset``: sub-packetization l = (h+s-1)(s-1)^(h-1) with s = d+1-k.
  Rows are labeled by h-digit vectors over [0, s-1] having at most one digit
  equal to s-1 (the set A).  Nodes 1..h carry s coefficients each
  (λ_{i,a_i} selected by the node's own digit); nodes h+1..n carry one fixed
  coefficient.  Such a code repairs exactly the node set {1..h}, from any d
  helpers, at cut-set-optimal bandwidth.

* ``any_subset``: rows carry one A-block per h-subset of [n] (m = C(n,h)
  blocks, l = |A|^m).  Every node is masked: its coefficient index is the sum
  mod s of one designated digit from each block whose subset contains the
  node.  Restricted to the rows where block g(F) varies and everything else
  is fixed, the parity checks collapse to a fixed_subset code for F, which is
  what makes every h-subset repairable.

* ``concatenated``: the row index is a tuple of component row indices
  (component 1 least significant); the coefficient index is the sum of the
  component masks mod s_max over one shared per-node table of s_max distinct
  coefficients.  Fixing all components but one leaves an injective relabeling
  of that component's coefficients, so each component's repair scheme applies
  unchanged.  The universal code is the concatenation over every admissible
  (h, d).

Node indices are 1-based throughout this module, matching the subset-ranking
arithmetic; array columns are the same nodes 0-based.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from math import comb, prod
from typing import Iterable, Sequence

import numpy as np

from coopmds.field import Field, FieldSpec, enumerate_elements, make_field, smallest_field_spec

DEFAULT_SUBPACKET_CAP = 2**24

_FAMILY_CODES = {"fixed_subset": 0, "any_subset": 1, "concatenated": 2}
_FAMILY_NAMES = {v: k for k, v in _FAMILY_CODES.items()}


class InadmissibleError(ValueError):
    """Parameters outside the constructible/repairable range."""


def card_A(h: int, s: int) -> int:
    return (h + s - 1) * (s - 1) ** (h - 1)


def build_A(h: int, s: int) -> np.ndarray:
    """All h-digit vectors over [0, s-1] with at most one digit equal to s-1,
    in lexicographic order; shape (|A|, h)."""
    if h < 1 or s < 2:
        raise ValueError("need h >= 1 and s >= 2")
    rows = [a for a in itertools.product(range(s), repeat=h) if a.count(s - 1) <= 1]
    out = np.array(rows, dtype=np.int64).reshape(len(rows), h)
    assert len(out) == card_A(h, s)
    return out


def build_Bi(h: int, s: int, i: int) -> np.ndarray:
    """B_i: digit i ranges over [0, s-1], all other digits over [0, s-2]."""
    if not 1 <= i <= h:
        raise ValueError(f"i must be in [1, {h}]")
    a = build_A(h, s)
    others = [j for j in range(h) if j != i - 1]
    keep = np.ones(len(a), dtype=bool)
    for j in others:
        keep &= a[:, j] < s - 1
    return a[keep]


def build_A0(h: int, s: int) -> np.ndarray:
    """A_0 = [0, s-2]^h, the intersection of all B_i."""
    a = build_A(h, s)
    return a[(a < s - 1).all(axis=1)]


def subset_rank(subset: Sequence[int]) -> int:
    """Rank of a strictly increasing positive subset in the colexicographic
    order of all same-size subsets; {1,..,h} -> 1."""
    f = list(subset)
    h = len(f)
    if h == 0 or any(f[i] >= f[i + 1] for i in range(h - 1)) or f[0] < 1:
        raise ValueError(f"subset must be strictly increasing and positive: {subset}")
    return sum(comb(f[j] - 1, j + 1) for j in range(h)) + 1


def subset_unrank(rank: int, h: int) -> tuple[int, ...]:
    """Inverse of subset_rank for subsets of size h."""
    if rank < 1 or h < 1:
        raise ValueError("rank and h must be positive")
    remaining = rank - 1
    out = []
    for j in range(h, 0, -1):
        v = j - 1
        while comb(v + 1, j) <= remaining:
            v += 1
        out.append(v + 1)
        remaining -= comb(v, j)
    return tuple(reversed(out))


@dataclass(frozen=True)
class CodeParams:
    """Dimensions of one code: h, d, s, m are None for concatenations."""

    n: int
    k: int
    r: int
    h: int | None
    d: int | None
    s: int | None
    l: int
    m: int | None


@dataclass(frozen=True)
class MultiIndex:
    """A row label: h·m digits forming m blocks of h, block 1 stored first
    (least significant)."""

    digits: tuple[int, ...]

    def blocks(self, h: int) -> tuple[tuple[int, ...], ...]:
        if len(self.digits) % h:
            raise ValueError("digit count not divisible by block size")
        return tuple(self.digits[j : j + h] for j in range(0, len(self.digits), h))


class CodeSpec:
    """Immutable descriptor of one code: family, parameters, field, λ table.

    ``lam`` holds one row per node; masked nodes use columns 0..width-1,
    unmasked nodes (fixed_subset, i > h) only column 0.
    """

    def __init__(
        self,
        family: str,
        params: CodeParams,
        fieldspec: FieldSpec,
        lam: np.ndarray,
        components: tuple["CodeSpec", ...] = (),
    ):
        self.family = family
        self.params = params
        self.fieldspec = fieldspec
        self.field = make_field(fieldspec)
        self.lam = lam
        self.lam.setflags(write=False)
        self.components = components
        self._coeff: np.ndarray | None = None

    # ---- identity ---------------------------------------------------------

    def descriptor(self) -> dict:
        out = {
            "family": self.family,
            "n": self.params.n,
            "k": self.params.k,
            "field": {"kind": self.fieldspec.kind, "modulus": self.fieldspec.modulus},
        }
        if self.family == "concatenated":
            out["components"] = [[c.params.h, c.params.d] for c in self.components]
        else:
            out["h"] = self.params.h
            out["d"] = self.params.d
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, CodeSpec) and self.descriptor() == other.descriptor()

    def __hash__(self) -> int:
        d = self.descriptor()
        comp = tuple(map(tuple, d.get("components", ())))
        return hash((d["family"], d["n"], d["k"], d.get("h"), d.get("d"), self.fieldspec, comp))

    def __repr__(self) -> str:
        p = self.params
        if self.family == "concatenated":
            pairs = ",".join(f"({c.params.h},{c.params.d})" for c in self.components)
            return f"CodeSpec(concatenated n={p.n} k={p.k} l={p.l} components=[{pairs}])"
        return f"CodeSpec({self.family} n={p.n} k={p.k} h={p.h} d={p.d} l={p.l})"

    # ---- row labels ---------------------------------------------------------

    @property
    def _cardA(self) -> int:
        assert self.family != "concatenated"
        return card_A(self.params.h, self.params.s)

    @property
    def A(self) -> np.ndarray:
        if not hasattr(self, "_A"):
            self._A = build_A(self.params.h, self.params.s)
        return self._A

    @property
    def apos(self) -> np.ndarray:
        """Lookup: mixed-radix key of block digits -> position in A (or -1)."""
        if not hasattr(self, "_apos"):
            h, s = self.params.h, self.params.s
            table = np.full(s**h, -1, dtype=np.int64)
            keys = (self.A * (s ** np.arange(h, dtype=np.int64))[None, :]).sum(axis=1)
            table[keys] = np.arange(len(self.A))
            self._apos = table
        return self._apos

    def apos_of(self, block: Sequence[int]) -> int:
        s = self.params.s
        key = sum(int(b) * s**j for j, b in enumerate(block))
        pos = int(self.apos[key])
        if pos < 0:
            raise ValueError(f"block {tuple(block)} not in A")
        return pos

    def multiindex(self, row: int) -> MultiIndex:
        if not 0 <= row < self.params.l:
            raise ValueError(f"row {row} out of range")
        digits: list[int] = []
        if self.family == "concatenated":
            rest = row
            for c in self.components:
                rest, sub = divmod(rest, c.params.l)
                digits.extend(c.multiindex(sub).digits)
        else:
            rest = row
            for _ in range(self.params.m):
                rest, pos = divmod(rest, self._cardA)
                digits.extend(int(x) for x in self.A[pos])
        return MultiIndex(tuple(digits))

    def row_of(self, mi: MultiIndex) -> int:
        if self.family == "concatenated":
            row, scale = 0, 1
            offset = 0
            for c in self.components:
                nd = c.params.h * c.params.m
                sub = c.row_of(MultiIndex(mi.digits[offset : offset + nd]))
                row += sub * scale
                scale *= c.params.l
                offset += nd
            if offset != len(mi.digits):
                raise ValueError("digit count mismatch")
            return row
        h = self.params.h
        blocks = mi.blocks(h)
        if len(blocks) != self.params.m:
            raise ValueError("block count mismatch")
        row, scale = 0, 1
        for b in blocks:
            row += self.apos_of(b) * scale
            scale *= self._cardA
        return row

    # ---- coefficients -------------------------------------------------------

    def mask_columns(self, rows: np.ndarray) -> np.ndarray:
        """Coefficient index (the λ column) per node for the given row
        numbers; shape (len(rows), n)."""
        rows = np.asarray(rows, dtype=np.int64)
        p = self.params
        if self.family == "fixed_subset":
            out = np.zeros((len(rows), p.n), dtype=np.int64)
            out[:, : p.h] = self.A[rows]
            return out
        if self.family == "any_subset":
            return _mask_columns(p.n, p.h, p.s, rows)
        acc = np.zeros((len(rows), p.n), dtype=np.int64)
        scale = 1
        smax = self.lam.shape[1]
        for c in self.components:
            sub = (rows // scale) % c.params.l
            acc += c.mask_columns(sub)
            scale *= c.params.l
        return acc % smax

    def coeff_matrix(self) -> np.ndarray:
        """The l×n table of λ values multiplying c_{i,row} in every parity
        row; cached, read-only."""
        if self._coeff is None:
            masks = self.mask_columns(np.arange(self.params.l))
            out = np.empty_like(masks)
            for col in range(self.params.n):
                out[:, col] = self.lam[col, masks[:, col]]
            out.setflags(write=False)
            self._coeff = out
        return self._coeff

    def lambdas_flat(self) -> list[int]:
        """All stored coefficients in assignment order."""
        p = self.params
        if self.family == "fixed_subset":
            masked = [int(self.lam[i, j]) for i in range(p.h) for j in range(p.s)]
            return masked + [int(self.lam[i, 0]) for i in range(p.h, p.n)]
        return [int(v) for v in self.lam.ravel()]

    # ---- repair support -----------------------------------------------------

    def admissible_pairs(self) -> list[tuple[int, int]]:
        if self.family == "concatenated":
            return sorted({(c.params.h, c.params.d) for c in self.components})
        return [(self.params.h, self.params.d)]

    def component_for(self, h: int, d: int) -> tuple["CodeSpec", int]:
        """The component handling (h, d) repairs plus its row-index stride
        base (the product of the earlier components' sub-packetizations)."""
        if self.family == "concatenated":
            scale = 1
            for c in self.components:
                if (c.params.h, c.params.d) == (h, d):
                    return c, scale
                scale *= c.params.l
            raise InadmissibleError(f"no component supports (h={h}, d={d})")
        if (self.params.h, self.params.d) != (h, d):
            raise InadmissibleError(
                f"code is built for (h={self.params.h}, d={self.params.d}), not (h={h}, d={d})"
            )
        return self, 1

    # ---- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        p = self.params
        if self.family == "concatenated":
            head = struct.pack("<BHHHH", _FAMILY_CODES[self.family], p.n, p.k, 0, 0)
            comps = struct.pack("<H", len(self.components)) + b"".join(
                struct.pack("<HH", c.params.h, c.params.d) for c in self.components
            )
        else:
            head = struct.pack("<BHHHH", _FAMILY_CODES[self.family], p.n, p.k, p.h, p.d)
            comps = struct.pack("<H", 0)
        return head + self.fieldspec.to_bytes() + comps

    @classmethod
    def from_bytes(cls, raw: bytes, offset: int = 0) -> tuple["CodeSpec", int]:
        fam_code, n, k, h, d = struct.unpack_from("<BHHHH", raw, offset)
        offset += 9
        if fam_code not in _FAMILY_NAMES:
            raise ValueError(f"unknown family code {fam_code}")
        family = _FAMILY_NAMES[fam_code]
        fieldspec = FieldSpec.from_bytes(raw[offset : offset + 3])
        offset += 3
        (ncomp,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        pairs = []
        for _ in range(ncomp):
            ch, cd = struct.unpack_from("<HH", raw, offset)
            offset += 4
            pairs.append((ch, cd))
        if family == "concatenated":
            spec = concat([make_code("any_subset", n, k, ch, cd, fieldspec) for ch, cd in pairs])
        else:
            spec = make_code(family, n, k, h, d, fieldspec)
        return spec, offset

    @classmethod
    def from_descriptor(cls, desc: dict) -> "CodeSpec":
        fieldspec = FieldSpec(desc["field"]["kind"], desc["field"]["modulus"])
        if desc["family"] == "concatenated":
            return concat(
                [
                    make_code("any_subset", desc["n"], desc["k"], h, d, fieldspec)
                    for h, d in desc["components"]
                ]
            )
        return make_code(desc["family"], desc["n"], desc["k"], desc["h"], desc["d"], fieldspec)


def _mask_columns(n: int, h: int, s: int, rows: np.ndarray) -> np.ndarray:
    """Any-subset mask for every node: sum over h-subsets F containing the
    node of the block-g(F) digit at the node's position within F, mod s."""
    a = build_A(h, s)
    ca = len(a)
    acc = np.zeros((len(rows), n), dtype=np.int64)
    for subset in itertools.combinations(range(1, n + 1), h):
        g = subset_rank(subset)
        apos = (rows // ca ** (g - 1)) % ca
        for z, node in enumerate(subset, start=1):
            acc[:, node - 1] += a[apos, z - 1]
    return acc % s


def mask_f(spec: CodeSpec, i: int, a: "MultiIndex | int") -> int:
    """Coefficient index of node i at row a (any-subset and concatenated)."""
    if spec.family == "fixed_subset":
        raise ValueError("fixed_subset nodes are masked by their own digit, not by f")
    row = spec.row_of(a) if isinstance(a, MultiIndex) else int(a)
    if not 0 <= row < spec.params.l:
        raise ValueError(f"row {row} out of range")
    if not 1 <= i <= spec.params.n:
        raise ValueError(f"node {i} out of range")
    return int(spec.mask_columns(np.array([row]))[0, i - 1])


def row_coeff(spec: CodeSpec, i: int, a: "MultiIndex | int") -> int:
    """The λ multiplying c_{i,a} in every parity row t."""
    if not 1 <= i <= spec.params.n:
        raise ValueError(f"node {i} out of range")
    row = spec.row_of(a) if isinstance(a, MultiIndex) else int(a)
    if not 0 <= row < spec.params.l:
        raise ValueError(f"row {row} out of range")
    return int(spec.coeff_matrix()[row, i - 1])


def min_field_order(family: str, n: int, h: int, s: int) -> int:
    if family == "fixed_subset":
        return n + h * (s - 1)
    return s * n


def _check_admissible(n: int, k: int, h: int, d: int) -> None:
    if n < 2 or not 1 <= k < n:
        raise InadmissibleError(f"need 1 <= k < n, got n={n} k={k}")
    if h < 1:
        raise InadmissibleError(f"need h >= 1, got h={h}")
    if d < k + 1:
        raise InadmissibleError(f"need d >= k+1 helpers, got d={d} k={k}")
    if h + d > n:
        raise InadmissibleError(f"need h + d <= n, got h={h} d={d} n={n}")


def make_code(
    family: str,
    n: int,
    k: int,
    h: int,
    d: int,
    field: "FieldSpec | Field",
    *,
    subpacket_cap: int = DEFAULT_SUBPACKET_CAP,
) -> CodeSpec:
    """Construct a fixed_subset or any_subset CodeSpec.

    The λ table is filled from the canonical field enumeration, masked
    entries first in row-major (node, index) order, then the unmasked ones.
    """
    if family not in ("fixed_subset", "any_subset"):
        raise ValueError(f"unknown family {family!r}")
    _check_admissible(n, k, h, d)
    fieldspec = field.spec if isinstance(field, Field) else field
    fobj = make_field(fieldspec)
    s = d + 1 - k
    ca = card_A(h, s)
    if family == "fixed_subset":
        m, l = 1, ca
    else:
        m = comb(n, h)
        l = ca**m
        if l > subpacket_cap:
            raise InadmissibleError(
                f"sub-packetization {ca}^{m} exceeds cap {subpacket_cap}"
            )
    need = min_field_order(family, n, h, s)
    if fobj.order < need:
        raise InadmissibleError(
            f"field order {fobj.order} below required {need} for {family} n={n} h={h} d={d}"
        )
    els = enumerate_elements(fobj, need)
    if family == "fixed_subset":
        lam = np.zeros((n, s), dtype=np.int64)
        for i in range(h):
            lam[i] = els[i * s : (i + 1) * s]
        for i in range(h, n):
            lam[i, 0] = els[h * s + (i - h)]
    else:
        lam = np.asarray(els, dtype=np.int64).reshape(n, s)
    params = CodeParams(n=n, k=k, r=n - k, h=h, d=d, s=s, l=l, m=m)
    return CodeSpec(family, params, fieldspec, lam)


def concat(codes: Iterable[CodeSpec], *, subpacket_cap: int = DEFAULT_SUBPACKET_CAP) -> CodeSpec:
    """Concatenation: row index = tuple of component rows, sub-packetizations
    multiply, one shared λ table of s_max entries per node.

    Components must be any_subset codes over the same (n, k) and field;
    nested concatenations are flattened.
    """
    flat: list[CodeSpec] = []
    for c in codes:
        if c.family == "concatenated":
            flat.extend(c.components)
        elif c.family == "any_subset":
            flat.append(c)
        else:
            raise InadmissibleError("concatenation components must be any_subset codes")
    if not flat:
        raise ValueError("nothing to concatenate")
    n, k = flat[0].params.n, flat[0].params.k
    fieldspec = flat[0].fieldspec
    for c in flat[1:]:
        if (c.params.n, c.params.k) != (n, k):
            raise InadmissibleError("components disagree on (n, k)")
        if c.fieldspec != fieldspec:
            raise InadmissibleError("components disagree on the field")
    l = prod(c.params.l for c in flat)
    if l > subpacket_cap:
        raise InadmissibleError(f"sub-packetization {l} exceeds cap {subpacket_cap}")
    smax = max(c.params.s for c in flat)
    fobj = make_field(fieldspec)
    need = smax * n
    if fobj.order < need:
        raise InadmissibleError(f"field order {fobj.order} below required {need} for concatenation")
    lam = np.asarray(enumerate_elements(fobj, need), dtype=np.int64).reshape(n, smax)
    params = CodeParams(n=n, k=k, r=n - k, h=None, d=None, s=None, l=l, m=None)
    return CodeSpec("concatenated", params, fieldspec, lam, components=tuple(flat))


def universal_code(
    n: int,
    k: int,
    field: "FieldSpec | Field | None" = None,
    *,
    subpacket_cap: int = DEFAULT_SUBPACKET_CAP,
) -> CodeSpec:
    """The concatenation over every admissible (h, d): optimal repair of any
    h failed nodes from any d >= k+1 helpers with h + d <= n."""
    pairs = [(h, d) for h in range(1, n - k) for d in range(k + 1, n - h + 1)]
    if not pairs:
        raise InadmissibleError(f"no admissible (h, d) pairs for n={n} k={k}")
    if field is None:
        smax = max(d + 1 - k for _, d in pairs)
        field = smallest_field_spec(smax * n)
    comps = [
        make_code("any_subset", n, k, h, d, field, subpacket_cap=subpacket_cap)
        for h, d in pairs
    ]
    return concat(comps, subpacket_cap=subpacket_cap)

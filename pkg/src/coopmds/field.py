"""Finite-field arithmetic over GF(p) and GF(2^w).

Symbols are plain integers in ``[0, order)``; prime fields interpret them as
residues, binary fields as polynomial-basis bit vectors.  Every operation
accepts either a scalar int or a numpy integer array and returns the same
shape, so callers can run row-parallel arithmetic without a separate API.

The element enumeration 0, 1, 2, ... is the canonical order used everywhere a
construction asks for "distinct field elements"; it is deterministic across
runs and platforms, which is what makes shard files self-describing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

Symbols = "int | np.ndarray"

# Reduction polynomials for GF(2^w), bit w..0.  w=8 and w=16 are pinned to
# x^8+x^4+x^3+x+1 and x^16+x^12+x^3+x+1 for cross-implementation shard
# compatibility; the rest are the usual low-weight irreducible choices.
_REDUCTION_POLY = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0x11B,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0x1100B,
}

_KIND_CODES = {"prime": 0, "binary": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Field descriptor: ``kind`` is ``"prime"`` (modulus = p) or ``"binary"``
    (modulus = w for GF(2^w))."""

    kind: str
    modulus: int

    def __post_init__(self) -> None:
        if self.kind == "prime":
            if not (2 <= self.modulus <= 0xFFFF):
                raise ValueError(f"prime modulus out of range: {self.modulus}")
            if not _is_prime(self.modulus):
                raise ValueError(f"modulus is not prime: {self.modulus}")
        elif self.kind == "binary":
            if not (1 <= self.modulus <= 16):
                raise ValueError(f"binary exponent out of range: {self.modulus}")
        else:
            raise ValueError(f"unknown field kind: {self.kind!r}")

    @property
    def order(self) -> int:
        return self.modulus if self.kind == "prime" else 1 << self.modulus

    def to_bytes(self) -> bytes:
        return struct.pack("<BH", _KIND_CODES[self.kind], self.modulus)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FieldSpec":
        if len(raw) != 3:
            raise ValueError("field descriptor must be 3 bytes")
        code, modulus = struct.unpack("<BH", raw)
        if code not in _KIND_NAMES:
            raise ValueError(f"unknown field kind code: {code}")
        return cls(_KIND_NAMES[code], modulus)


def _clmul_reduce(a: int, b: int, poly: int, w: int) -> int:
    """Carry-less multiply then reduce modulo ``poly``; reference path used to
    build tables and as an oracle in tests."""
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> w & 1:
            a ^= poly
    return acc


class Field:
    """Arithmetic over a single finite field.

    All methods are polymorphic in int vs. numpy array operands. Division and
    inversion raise ZeroDivisionError on zero; ``pow`` follows the convention
    0^0 = 1 so the t=0 parity row is all ones even when a coefficient is 0.
    """

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.order = spec.order
        if spec.kind == "prime":
            self._p = spec.modulus
            inv = np.zeros(self._p, dtype=np.int64)
            for a in range(1, self._p):
                inv[a] = pow(a, self._p - 2, self._p)
            self._inv_table = inv
        else:
            self._w = spec.modulus
            self._poly = _REDUCTION_POLY[self._w]
            self._build_log_tables()

    def _build_log_tables(self) -> None:
        q = self.order
        if q == 2:
            self.generator = 1
            self._exp = np.array([1, 1], dtype=np.int64)
            self._log = np.array([-1, 0], dtype=np.int64)
            return
        for g in range(2, q):
            exp = np.zeros(2 * (q - 1), dtype=np.int64)
            log = np.full(q, -1, dtype=np.int64)
            v = 1
            ok = True
            for i in range(q - 1):
                if log[v] != -1:
                    ok = False  # period of g divides i < q-1
                    break
                exp[i] = v
                log[v] = i
                v = _clmul_reduce(v, g, self._poly, self._w)
            if ok and v == 1:
                exp[q - 1 : 2 * (q - 1)] = exp[: q - 1]
                self.generator = g
                self._exp = exp
                self._log = log
                return
        raise ValueError(f"no generator found for GF(2^{self._w})")

    # ---- basic operations ----------------------------------------------

    def add(self, a, b):
        if self.spec.kind == "prime":
            return (a + b) % self._p
        return a ^ b

    def sub(self, a, b):
        if self.spec.kind == "prime":
            return (a - b) % self._p
        return a ^ b

    def neg(self, a):
        if self.spec.kind == "prime":
            return (-a) % self._p
        return a

    def mul(self, a, b):
        if self.spec.kind == "prime":
            return (a * b) % self._p
        if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
            a = np.asarray(a, dtype=np.int64)
            b = np.asarray(b, dtype=np.int64)
            nz = (a != 0) & (b != 0)
            # index 0 is harmless for masked-out lanes
            out = self._exp[self._log[np.where(nz, a, 1)] + self._log[np.where(nz, b, 1)]]
            return np.where(nz, out, 0)
        if a == 0 or b == 0:
            return 0
        return int(self._exp[self._log[a] + self._log[b]])

    def inv(self, a):
        if isinstance(a, np.ndarray):
            if (np.asarray(a) == 0).any():
                raise ZeroDivisionError("inverse of zero")
            if self.spec.kind == "prime":
                return self._inv_table[a]
            q1 = self.order - 1
            return self._exp[(q1 - self._log[a]) % q1]
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        if self.spec.kind == "prime":
            return int(self._inv_table[a])
        q1 = self.order - 1
        return int(self._exp[(q1 - self._log[a]) % q1])

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, t: int):
        """a^t by square-and-multiply; t is a non-negative plain integer."""
        if t < 0:
            raise ValueError("negative exponent")
        result = np.ones_like(a) if isinstance(a, np.ndarray) else 1
        base = a
        while t:
            if t & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            t >>= 1
        return result

    def sum(self, arr: np.ndarray, axis=None):
        """Field sum along an axis (xor-reduce for binary, modular for prime)."""
        if self.spec.kind == "prime":
            return np.asarray(arr, dtype=np.int64).sum(axis=axis) % self._p
        return np.bitwise_xor.reduce(np.asarray(arr, dtype=np.int64), axis=axis)

    def elements(self, count: int) -> list[int]:
        return enumerate_elements(self, count)

    def __repr__(self) -> str:
        base = f"GF({self.spec.modulus})" if self.spec.kind == "prime" else f"GF(2^{self.spec.modulus})"
        return f"Field({base})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Field) and other.spec == self.spec

    def __hash__(self) -> int:
        return hash(self.spec)


@lru_cache(maxsize=None)
def _field_cached(kind: str, modulus: int) -> Field:
    return Field(FieldSpec(kind, modulus))


def make_field(spec: "FieldSpec | str", modulus: int | None = None) -> Field:
    """Build (or fetch the cached) field for a FieldSpec, or for
    ``make_field("prime", 7)`` / ``make_field("binary", 8)`` shorthand."""
    if isinstance(spec, FieldSpec):
        return _field_cached(spec.kind, spec.modulus)
    if modulus is None:
        raise ValueError("modulus required when kind given as string")
    return _field_cached(spec, modulus)


def enumerate_elements(field: Field, count: int) -> list[int]:
    """First ``count`` elements in canonical ascending-value order."""
    if count < 1:
        raise ValueError("count must be positive")
    if count > field.order:
        raise ValueError(f"count {count} exceeds field order {field.order}")
    return list(range(count))


def smallest_field_spec(min_order: int) -> FieldSpec:
    """Smallest supported field (prime or GF(2^w)) with order >= min_order."""
    if min_order > 0x10000:
        raise ValueError(f"no supported field of order >= {min_order}")
    q = max(2, min_order)
    while True:
        if q > 2 and (q & (q - 1)) == 0:
            w = q.bit_length() - 1
            if w <= 16:
                return FieldSpec("binary", w)
        if q <= 0xFFFF and _is_prime(q):
            return FieldSpec("prime", q)
        q += 1
        if q > 0x10000:
            raise ValueError(f"no supported field of order >= {min_order}")

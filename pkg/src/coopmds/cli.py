"""Command-line front end: shard files across storage nodes, repair lost
shards with the two-round protocol, verify checksums and parities, print
bandwidth bounds, sweep parameters, and run cluster scenarios.

Shard file layout (all integers little-endian):

    magic        4 bytes  b"CMDS"
    version      u8       1
    field        3 bytes  FieldSpec.to_bytes()
    spec         var      CodeSpec.to_bytes() (includes the field again)
    node         u16      1-based node index
    stripes      u32      stripe count
    orig_len     u64      byte length of the original file
    checksum     u32      CRC-32 of the payload that follows
    payload      var      stripes * l symbols, stripe-major

Symbols are one byte when the field order is at most 256, two bytes
otherwise.  A stripe holds k*l data symbols taken from the file in order,
zero-padded at the end; shard i stores row coordinate i of every stripe.

Exit codes: 0 success, 2 inadmissible parameters or malformed input,
3 verification failure (checksum, parity, or corrupt shard), 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import struct
import sys
import zlib
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from coopmds.cluster import ClusterConfig, inject_and_sweep, run_scenario
from coopmds.codespec import CodeSpec, InadmissibleError, card_A, make_code, min_field_order
from coopmds.field import FieldSpec, make_field, smallest_field_spec
from coopmds.grs import recover_batched
from coopmds.repair import (
    RepairContext,
    _fraction_json,
    cutset_centralized,
    cutset_cooperative,
    repair_columns,
)

MAGIC = b"CMDS"
VERSION = 1

EXIT_OK = 0
EXIT_INADMISSIBLE = 2
EXIT_VERIFY = 3
EXIT_IO = 4

_TRAILER = struct.Struct("<HIQI")


class ShardFormatError(Exception):
    """Shard bytes that cannot be trusted: bad magic, version, or framing."""


@dataclass(frozen=True)
class ShardHeader:
    spec: CodeSpec
    node: int
    stripes: int
    orig_len: int
    checksum: int

    def to_bytes(self) -> bytes:
        return b"".join(
            (
                MAGIC,
                struct.pack("<B", VERSION),
                self.spec.fieldspec.to_bytes(),
                self.spec.to_bytes(),
                _TRAILER.pack(self.node, self.stripes, self.orig_len, self.checksum),
            )
        )

    @classmethod
    def parse(cls, raw: bytes) -> tuple["ShardHeader", int]:
        """Split raw shard bytes into a header and the payload offset."""
        if raw[:4] != MAGIC:
            raise ShardFormatError("bad magic")
        if len(raw) < 8:
            raise ShardFormatError("truncated header")
        if raw[4] != VERSION:
            raise ShardFormatError(f"unsupported shard version {raw[4]}")
        try:
            fieldspec = FieldSpec.from_bytes(raw[5:8])
            spec, off = CodeSpec.from_bytes(raw, 8)
        except (ValueError, struct.error) as exc:
            raise ShardFormatError(f"unreadable code spec: {exc}") from exc
        if spec.fieldspec != fieldspec:
            raise ShardFormatError("field descriptor disagrees with code spec")
        if len(raw) < off + _TRAILER.size:
            raise ShardFormatError("truncated header")
        node, stripes, orig_len, checksum = _TRAILER.unpack_from(raw, off)
        return cls(spec, node, stripes, orig_len, checksum), off + _TRAILER.size


def _symbol_width(order: int) -> int:
    return 1 if order <= 256 else 2


def _bytes_to_symbols(raw: bytes, order: int) -> np.ndarray:
    if _symbol_width(order) == 1:
        return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if len(raw) % 2:
        raise ShardFormatError("odd payload length for two-byte symbols")
    return np.frombuffer(raw, dtype="<u2").astype(np.int64)


def _symbols_to_bytes(arr: np.ndarray, order: int) -> bytes:
    dtype = np.uint8 if _symbol_width(order) == 1 else np.dtype("<u2")
    return np.ascontiguousarray(arr, dtype=dtype).tobytes()


def _shard_name(node: int) -> str:
    return f"shard_{node:03d}.cmds"


def _field_from_order(order: int) -> FieldSpec:
    if order >= 2 and order & (order - 1) == 0:
        return FieldSpec("binary", order.bit_length() - 1)
    return FieldSpec("prime", order)


def _emit(doc: dict, out: "Path | None") -> None:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    if out is not None:
        out.write_text(text + "\n")
    print(text)


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


# ---- encode ------------------------------------------------------------------


def _encode_stripes(spec: CodeSpec, data: np.ndarray) -> np.ndarray:
    """Encode data of shape (l, k, stripes) into cells (l, n, stripes)."""
    p = spec.params
    field = make_field(spec.fieldspec)
    stripes = data.shape[2]
    points = np.repeat(spec.coeff_matrix(), stripes, axis=0)
    flat = data.transpose(0, 2, 1).reshape(p.l * stripes, p.k)
    parity = recover_batched(field, points, p.r, np.arange(p.k), flat)
    cells = np.concatenate([flat, parity], axis=1)
    return cells.reshape(p.l, stripes, p.n).transpose(0, 2, 1)


def cmd_encode(
    input_path: Path,
    out_dir: Path,
    *,
    family: str,
    n: int,
    k: int,
    h: int,
    d: int,
    field_order: int = 256,
    out: "Path | None" = None,
) -> int:
    raw = input_path.read_bytes()
    if not raw:
        raise InadmissibleError("input file is empty")
    orig_len = len(raw)
    spec = make_code(family, n, k, h, d, _field_from_order(field_order))
    order = spec.field.order
    if _symbol_width(order) == 2 and len(raw) % 2:
        raw += b"\x00"
    symbols = _bytes_to_symbols(raw, order)
    if symbols.size and int(symbols.max()) >= order:
        raise InadmissibleError(
            f"input symbol {int(symbols.max())} is outside GF({order}); pick a larger field"
        )
    p = spec.params
    per_stripe = p.k * p.l
    stripes = -(-symbols.size // per_stripe)
    padded = np.zeros(stripes * per_stripe, dtype=np.int64)
    padded[: symbols.size] = symbols
    cells = _encode_stripes(spec, padded.reshape(stripes, p.l, p.k).transpose(1, 2, 0))

    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for node in range(1, p.n + 1):
        payload = _symbols_to_bytes(cells[:, node - 1, :].T, order)
        header = ShardHeader(spec, node, stripes, orig_len, zlib.crc32(payload))
        (out_dir / _shard_name(node)).write_bytes(header.to_bytes() + payload)
        names.append(_shard_name(node))
    _emit(
        {
            "shards": names,
            "stripes": stripes,
            "orig_len": orig_len,
            "field": order,
            "l": p.l,
            "spec": spec.descriptor(),
        },
        out,
    )
    return EXIT_OK


# ---- shard reading -----------------------------------------------------------


def _read_shard(path: Path) -> tuple[ShardHeader, bytes]:
    raw = path.read_bytes()
    header, off = ShardHeader.parse(raw)
    return header, raw[off:]


def _shard_column(header: ShardHeader, payload: bytes) -> np.ndarray:
    l = header.spec.params.l
    symbols = _bytes_to_symbols(payload, header.spec.field.order)
    if symbols.size != header.stripes * l:
        raise ShardFormatError(
            f"payload holds {symbols.size} symbols, header promises {header.stripes * l}"
        )
    return np.ascontiguousarray(symbols.reshape(header.stripes, l).T)


# ---- repair ------------------------------------------------------------------


def cmd_repair(
    shard_dir: Path,
    fail: list[int],
    helpers: list[int],
    *,
    mode: str = "cooperative",
    out: "Path | None" = None,
) -> int:
    if not fail:
        _emit({"restored": [], "mode": mode, "total": 0, "links": {}, "stripes": 0}, out)
        return EXIT_OK
    ctx = RepairContext(tuple(fail), tuple(helpers))
    headers: dict[int, ShardHeader] = {}
    columns: dict[int, np.ndarray] = {}
    reference: "ShardHeader | None" = None
    for node in ctx.helpers:
        header, payload = _read_shard(shard_dir / _shard_name(node))
        if header.node != node:
            raise ShardFormatError(f"{_shard_name(node)} claims node {header.node}")
        if zlib.crc32(payload) != header.checksum:
            raise ShardFormatError(f"checksum mismatch in {_shard_name(node)}")
        if reference is None:
            reference = header
        elif (header.spec, header.stripes, header.orig_len) != (
            reference.spec,
            reference.stripes,
            reference.orig_len,
        ):
            raise InadmissibleError(f"{_shard_name(node)} disagrees with the other shards")
        headers[node] = header
        columns[node] = _shard_column(header, payload)

    spec = reference.spec
    restored, transcript = repair_columns(spec, ctx, columns, mode=mode)
    names = []
    for node in ctx.failed:
        payload = _symbols_to_bytes(restored[node].T, spec.field.order)
        header = ShardHeader(
            spec, node, reference.stripes, reference.orig_len, zlib.crc32(payload)
        )
        (shard_dir / _shard_name(node)).write_bytes(header.to_bytes() + payload)
        names.append(_shard_name(node))
    report = transcript.to_dict()
    report["restored"] = names
    report["per_stripe"] = _fraction_json(Fraction(transcript.ledger.total, reference.stripes))
    _emit(report, out)
    return EXIT_OK


# ---- decode ------------------------------------------------------------------


def cmd_decode(shard_dir: Path, output: Path, *, out: "Path | None" = None) -> int:
    """Rebuild the original file from any k consistent shards."""
    paths = sorted(shard_dir.glob("shard_*.cmds"))
    if not paths:
        raise FileNotFoundError(f"no shards found in {shard_dir}")
    columns: dict[int, np.ndarray] = {}
    reference: "ShardHeader | None" = None
    for path in paths:
        header, payload = _read_shard(path)
        if zlib.crc32(payload) != header.checksum:
            raise ShardFormatError(f"checksum mismatch in {path.name}")
        if reference is None:
            reference = header
        elif (header.spec, header.stripes, header.orig_len) != (
            reference.spec,
            reference.stripes,
            reference.orig_len,
        ):
            raise InadmissibleError(f"{path.name} disagrees with the other shards")
        columns[header.node] = _shard_column(header, payload)

    spec = reference.spec
    p = spec.params
    if len(columns) < p.k:
        raise InadmissibleError(f"need {p.k} shards to decode, found {len(columns)}")
    use = sorted(columns)[: p.k]
    stripes = reference.stripes
    if use == list(range(1, p.k + 1)):
        data = np.stack([columns[i] for i in use], axis=1)
    else:
        field = make_field(spec.fieldspec)
        points = np.repeat(spec.coeff_matrix(), stripes, axis=0)
        known = np.stack([columns[i] for i in use], axis=1)
        flat = known.transpose(0, 2, 1).reshape(p.l * stripes, p.k)
        known_pos = np.array([i - 1 for i in use])
        rest = recover_batched(field, points, p.r, known_pos, flat)
        cells = np.empty((p.l * stripes, p.n), dtype=np.int64)
        cells[:, known_pos] = flat
        cells[:, [j for j in range(p.n) if j + 1 not in use]] = rest
        data = cells[:, : p.k].reshape(p.l, stripes, p.k).transpose(0, 2, 1)

    blob = _symbols_to_bytes(data.transpose(2, 0, 1).reshape(-1), spec.field.order)
    output.write_bytes(blob[: reference.orig_len])
    _emit(
        {"output": output.name, "bytes": reference.orig_len, "nodes_used": use},
        out,
    )
    return EXIT_OK


# ---- verify ------------------------------------------------------------------


def _parity_ok_batched(spec: CodeSpec, cells: np.ndarray) -> "tuple[bool, int, int]":
    """Check all parities over cells of shape (l, n, stripes)."""
    field = spec.field
    coeff = spec.coeff_matrix()
    pw = np.ones_like(coeff)
    for t in range(spec.params.r):
        checks = field.sum(field.mul(pw[:, :, None], cells), axis=1)
        bad = np.nonzero(checks)
        if bad[0].size:
            return False, t, int(bad[0][0])
        if t + 1 < spec.params.r:
            pw = field.mul(pw, coeff)
    return True, -1, -1


def cmd_verify(shard_dir: Path, *, out: "Path | None" = None) -> int:
    paths = sorted(shard_dir.glob("shard_*.cmds"))
    if not paths:
        raise FileNotFoundError(f"no shards found in {shard_dir}")
    shard_reports = []
    parsed: dict[int, tuple[ShardHeader, bytes]] = {}
    reference: "ShardHeader | None" = None
    ok = True
    for path in paths:
        try:
            header, payload = _read_shard(path)
        except ShardFormatError as exc:
            shard_reports.append({"shard": path.name, "ok": False, "error": str(exc)})
            ok = False
            continue
        if zlib.crc32(payload) != header.checksum:
            shard_reports.append({"shard": path.name, "ok": False, "error": "checksum mismatch"})
            ok = False
            continue
        if reference is None:
            reference = header
        elif (header.spec, header.stripes, header.orig_len) != (
            reference.spec,
            reference.stripes,
            reference.orig_len,
        ):
            shard_reports.append(
                {"shard": path.name, "ok": False, "error": "disagrees with other shards"}
            )
            ok = False
            continue
        shard_reports.append({"shard": path.name, "ok": True})
        parsed[header.node] = (header, payload)

    report: dict = {"shards": shard_reports}
    if reference is not None:
        n = reference.spec.params.n
        missing = sorted(set(range(1, n + 1)) - set(parsed))
        report["missing"] = missing
        if missing:
            ok = False
        elif ok:
            cells = np.stack(
                [_shard_column(*parsed[node]) for node in range(1, n + 1)], axis=1
            )
            good, t, row = _parity_ok_batched(reference.spec, cells)
            report["parity"] = {"ok": good} if good else {"ok": False, "check": t, "row": row}
            ok = good
    report["ok"] = ok
    _emit(report, out)
    return EXIT_OK if ok else EXIT_VERIFY


# ---- bound -------------------------------------------------------------------


def cmd_bound(n: int, k: int, h: int, d: int, l: "int | None" = None) -> int:
    if h < 1 or d < k + 1 or h + d > n:
        raise InadmissibleError(f"no admissible repair with n={n} k={k} h={h} d={d}")
    if l is None:
        l = card_A(h, d + 1 - k)
    coop = cutset_cooperative(h, d, k, l)
    central = cutset_centralized(h, d, k, l)
    quota = Fraction(l, h + d - k)
    print(f"parameters n={n} k={k} h={h} d={d} l={l}")
    print(f"cooperative {_fraction_json(coop)}")
    print(f"centralized {_fraction_json(central)}")
    print(f"per-link {_fraction_json(quota)}")
    return EXIT_OK


# ---- bench -------------------------------------------------------------------


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    start = int(lo)
    stop = int(hi) if hi else start
    if stop < start:
        raise ValueError(f"empty range {text!r}")
    return start, stop


def cmd_bench(sweep: str, *, family: str = "fixed_subset", out: "Path | None" = None) -> int:
    start, stop = _parse_range(sweep)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "n",
            "k",
            "h",
            "d",
            "l",
            "coop_measured",
            "coop_bound",
            "central_measured",
            "central_bound",
            "optimal",
        ]
    )
    for n in range(start, stop + 1):
        for k in range(1, n):
            for h in range(1, n - k):
                for d in range(k + 1, n - h + 1):
                    try:
                        fieldspec = smallest_field_spec(min_field_order(family, n, h, d + 1 - k))
                        spec = make_code(family, n, k, h, d, fieldspec)
                    except InadmissibleError:
                        continue
                    rows = inject_and_sweep(spec)
                    p = spec.params
                    measured = {
                        mode: {r["measured"] for r in rows if r["mode"] == mode}
                        for mode in ("cooperative", "centralized")
                    }
                    if any(len(v) != 1 for v in measured.values()):
                        raise RuntimeError(f"non-uniform traffic for n={n} k={k} h={h} d={d}")
                    writer.writerow(
                        [
                            n,
                            k,
                            h,
                            d,
                            p.l,
                            measured["cooperative"].pop(),
                            _fraction_json(cutset_cooperative(h, d, k, p.l)),
                            measured["centralized"].pop(),
                            _fraction_json(cutset_centralized(h, d, k, p.l)),
                            str(all(r["optimal"] for r in rows)).lower(),
                        ]
                    )
    text = buf.getvalue()
    if out is not None:
        out.write_text(text)
    print(text, end="")
    return EXIT_OK


# ---- scenario ----------------------------------------------------------------


def cmd_scenario(config_path: Path, *, workers: int = 1, out: "Path | None" = None) -> int:
    config = ClusterConfig.from_json(config_path.read_text())
    report = run_scenario(config, workers=workers)
    _emit(report.to_dict(), out)
    return EXIT_OK if report.verified else EXIT_VERIFY


# ---- argument parsing ----------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coopmds",
        description="Shard files with MDS array codes that repair multiple "
        "nodes at optimal cooperative bandwidth.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="split a file into n shards")
    enc.add_argument("input", type=Path)
    enc.add_argument("outdir", type=Path)
    enc.add_argument("--family", choices=("fixed_subset", "any_subset"), default="fixed_subset")
    enc.add_argument("--n", type=int, required=True)
    enc.add_argument("--k", type=int, required=True)
    enc.add_argument("--h", type=int, required=True)
    enc.add_argument("--d", type=int, required=True)
    enc.add_argument("--field", type=int, default=256, help="field order (default GF(256))")
    enc.add_argument("--out", type=Path, help="also write the report JSON here")

    rep = sub.add_parser("repair", help="rebuild failed shards from helper shards")
    rep.add_argument("sharddir", type=Path)
    rep.add_argument("--fail", type=_int_list, default=[], help="failed nodes, e.g. 1,2")
    rep.add_argument("--helpers", type=_int_list, default=[], help="helper nodes, e.g. 3,4,5")
    rep.add_argument("--mode", choices=("cooperative", "centralized"), default="cooperative")
    rep.add_argument("--out", type=Path)

    dec = sub.add_parser("decode", help="rebuild the original file from k shards")
    dec.add_argument("sharddir", type=Path)
    dec.add_argument("output", type=Path)
    dec.add_argument("--out", type=Path)

    ver = sub.add_parser("verify", help="check shard checksums and all parities")
    ver.add_argument("sharddir", type=Path)
    ver.add_argument("--out", type=Path)

    bnd = sub.add_parser("bound", help="print cut-set bandwidth bounds")
    bnd.add_argument("--n", type=int, required=True)
    bnd.add_argument("--k", type=int, required=True)
    bnd.add_argument("--h", type=int, required=True)
    bnd.add_argument("--d", type=int, required=True)
    bnd.add_argument("--l", type=int, help="subpacketization (default: fixed-subset value)")

    ben = sub.add_parser("bench", help="sweep parameters and measure repair traffic")
    ben.add_argument("--sweep", required=True, help="range of n, e.g. 5:8")
    ben.add_argument("--family", choices=("fixed_subset", "any_subset"), default="fixed_subset")
    ben.add_argument("--out", type=Path)

    scn = sub.add_parser("scenario", help="run a cluster scenario file")
    scn.add_argument("config", type=Path)
    scn.add_argument("--workers", type=int, default=1)
    scn.add_argument("--out", type=Path)
    return ap


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "encode":
            return cmd_encode(
                args.input,
                args.outdir,
                family=args.family,
                n=args.n,
                k=args.k,
                h=args.h,
                d=args.d,
                field_order=args.field,
                out=args.out,
            )
        if args.command == "repair":
            return cmd_repair(
                args.sharddir, args.fail, args.helpers, mode=args.mode, out=args.out
            )
        if args.command == "decode":
            return cmd_decode(args.sharddir, args.output, out=args.out)
        if args.command == "verify":
            return cmd_verify(args.sharddir, out=args.out)
        if args.command == "bound":
            return cmd_bound(args.n, args.k, args.h, args.d, args.l)
        if args.command == "bench":
            return cmd_bench(args.sweep, family=args.family, out=args.out)
        return cmd_scenario(args.config, workers=args.workers, out=args.out)
    except (InadmissibleError, ValueError, KeyError) as exc:
        _err(str(exc))
        return EXIT_INADMISSIBLE
    except ShardFormatError as exc:
        _err(str(exc))
        return EXIT_VERIFY
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

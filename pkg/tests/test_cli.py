"""Shard round trips, exit codes, and report formats for the console tool."""

from __future__ import annotations

import hashlib
import json

import numpy as np
import pytest

from coopmds.cli import (
    EXIT_INADMISSIBLE,
    EXIT_IO,
    EXIT_OK,
    EXIT_VERIFY,
    ShardFormatError,
    ShardHeader,
    _int_list,
    main,
)
from coopmds.cluster import ClusterConfig
from coopmds.codespec import make_code
from coopmds.field import FieldSpec


def write_input(tmp_path, size=1024, seed=1234):
    rng = np.random.default_rng(seed)
    path = tmp_path / "input.bin"
    path.write_bytes(rng.integers(0, 256, size, dtype=np.uint8).tobytes())
    return path


def encode_default(tmp_path, **overrides):
    args = {"n": 5, "k": 2, "h": 2, "d": 3}
    args.update(overrides)
    src = write_input(tmp_path)
    outdir = tmp_path / "shards"
    argv = ["encode", str(src), str(outdir)]
    for key, val in args.items():
        argv += [f"--{key}", str(val)]
    return src, outdir, main(argv)


def shard_hashes(outdir):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in outdir.glob("*.cmds")}


# ---- encode -----------------------------------------------------------------


def test_encode_creates_expected_shards(tmp_path, capsys):
    src, outdir, code = encode_default(tmp_path)
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["stripes"] == 171  # ceil(1024 / (k*l)) with k*l = 6
    assert doc["l"] == 3 and doc["field"] == 256
    files = sorted(outdir.glob("*.cmds"))
    assert [p.name for p in files] == [f"shard_00{i}.cmds" for i in range(1, 6)]
    header, off = ShardHeader.parse(files[0].read_bytes())
    assert header.node == 1 and header.stripes == 171 and header.orig_len == 1024
    assert header.spec.params.n == 5 and header.spec.params.l == 3
    assert len(files[0].read_bytes()) - off == 171 * 3


def test_encode_empty_file(tmp_path):
    src = tmp_path / "empty.bin"
    src.write_bytes(b"")
    code = main(["encode", str(src), str(tmp_path / "out"), "--n", "5", "--k", "2", "--h", "2", "--d", "3"])
    assert code == EXIT_INADMISSIBLE


def test_encode_inadmissible_parameters(tmp_path):
    _, _, code = encode_default(tmp_path, h=3)  # h + d > n
    assert code == EXIT_INADMISSIBLE


def test_encode_rejects_symbols_outside_small_field(tmp_path):
    _, _, code = encode_default(tmp_path, field=7)
    assert code == EXIT_INADMISSIBLE


def test_encode_missing_input(tmp_path):
    code = main(
        ["encode", str(tmp_path / "nope"), str(tmp_path / "out"), "--n", "5", "--k", "2", "--h", "2", "--d", "3"]
    )
    assert code == EXIT_IO


# ---- repair -----------------------------------------------------------------


def test_repair_restores_deleted_shards_byte_identical(tmp_path, capsys):
    _, outdir, _ = encode_default(tmp_path)
    before = shard_hashes(outdir)
    (outdir / "shard_001.cmds").unlink()
    (outdir / "shard_002.cmds").unlink()
    capsys.readouterr()
    code = main(["repair", str(outdir), "--fail", "1,2", "--helpers", "3,4,5"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["restored"] == ["shard_001.cmds", "shard_002.cmds"]
    assert doc["total"] == 8 * 171
    assert doc["per_stripe"] == 8
    assert doc["optimal"] is True
    assert shard_hashes(outdir) == before


def test_repair_no_failures_is_a_no_op(tmp_path, capsys):
    _, outdir, _ = encode_default(tmp_path)
    capsys.readouterr()
    code = main(["repair", str(outdir), "--helpers", "3,4,5"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["restored"] == [] and doc["total"] == 0


def test_repair_helpers_overlapping_failed(tmp_path):
    _, outdir, _ = encode_default(tmp_path)
    assert main(["repair", str(outdir), "--fail", "1,2", "--helpers", "2,3,4"]) == EXIT_INADMISSIBLE


def test_repair_with_corrupt_helper(tmp_path):
    _, outdir, _ = encode_default(tmp_path)
    path = outdir / "shard_004.cmds"
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    assert main(["repair", str(outdir), "--fail", "1,2", "--helpers", "3,4,5"]) == EXIT_VERIFY


def test_repair_with_missing_helper(tmp_path):
    _, outdir, _ = encode_default(tmp_path)
    (outdir / "shard_005.cmds").unlink()
    assert main(["repair", str(outdir), "--fail", "1,2", "--helpers", "3,4,5"]) == EXIT_IO


def test_repair_centralized_mode(tmp_path, capsys):
    _, outdir, _ = encode_default(tmp_path)
    before = shard_hashes(outdir)
    (outdir / "shard_001.cmds").unlink()
    (outdir / "shard_002.cmds").unlink()
    capsys.readouterr()
    code = main(["repair", str(outdir), "--fail", "1,2", "--helpers", "3,4,5", "--mode", "centralized"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["total"] == 6 * 171 and doc["per_stripe"] == 6
    assert shard_hashes(outdir) == before


# ---- decode -----------------------------------------------------------------


def test_decode_round_trip(tmp_path):
    src, outdir, _ = encode_default(tmp_path)
    dest = tmp_path / "roundtrip.bin"
    assert main(["decode", str(outdir), str(dest)]) == EXIT_OK
    assert dest.read_bytes() == src.read_bytes()


def test_decode_without_systematic_shards(tmp_path, capsys):
    src, outdir, _ = encode_default(tmp_path)
    (outdir / "shard_001.cmds").unlink()
    (outdir / "shard_002.cmds").unlink()
    dest = tmp_path / "roundtrip.bin"
    capsys.readouterr()
    assert main(["decode", str(outdir), str(dest)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["nodes_used"] == [3, 4]
    assert dest.read_bytes() == src.read_bytes()


def test_decode_with_too_few_shards(tmp_path):
    _, outdir, _ = encode_default(tmp_path)
    for node in (1, 2, 3, 4):
        (outdir / f"shard_00{node}.cmds").unlink()
    assert main(["decode", str(outdir), str(tmp_path / "x.bin")]) == EXIT_INADMISSIBLE


def test_decode_rejects_corrupt_shard(tmp_path):
    _, outdir, _ = encode_default(tmp_path)
    path = outdir / "shard_002.cmds"
    raw = bytearray(path.read_bytes())
    raw[-3] ^= 0x10
    path.write_bytes(bytes(raw))
    assert main(["decode", str(outdir), str(tmp_path / "x.bin")]) == EXIT_VERIFY


# ---- verify -----------------------------------------------------------------


def test_verify_clean_directory(tmp_path, capsys):
    _, outdir, _ = encode_default(tmp_path)
    capsys.readouterr()
    assert main(["verify", str(outdir)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is True and doc["missing"] == []
    assert doc["parity"] == {"ok": True}


def test_verify_flags_flipped_byte(tmp_path, capsys):
    _, outdir, _ = encode_default(tmp_path)
    path = outdir / "shard_003.cmds"
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0x01
    path.write_bytes(bytes(raw))
    capsys.readouterr()
    assert main(["verify", str(outdir)]) == EXIT_VERIFY
    doc = json.loads(capsys.readouterr().out)
    flagged = [s for s in doc["shards"] if not s["ok"]]
    assert flagged == [{"shard": "shard_003.cmds", "ok": False, "error": "checksum mismatch"}]


def test_verify_reports_missing_shard(tmp_path, capsys):
    _, outdir, _ = encode_default(tmp_path)
    (outdir / "shard_002.cmds").unlink()
    capsys.readouterr()
    assert main(["verify", str(outdir)]) == EXIT_VERIFY
    doc = json.loads(capsys.readouterr().out)
    assert doc["missing"] == [2]


def test_verify_empty_directory(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    assert main(["verify", str(empty)]) == EXIT_IO


# ---- two-byte symbols --------------------------------------------------------


def test_wide_field_round_trip(tmp_path, capsys):
    src = tmp_path / "wide.bin"
    src.write_bytes(bytes(range(251, 256)) + bytes(range(4)))  # odd length
    outdir = tmp_path / "shards"
    code = main(
        ["encode", str(src), str(outdir), "--n", "4", "--k", "1", "--h", "2", "--d", "2", "--field", "65536"]
    )
    assert code == EXIT_OK
    before = shard_hashes(outdir)
    (outdir / "shard_001.cmds").unlink()
    (outdir / "shard_002.cmds").unlink()
    assert main(["repair", str(outdir), "--fail", "1,2", "--helpers", "3,4"]) == EXIT_OK
    assert shard_hashes(outdir) == before
    assert main(["verify", str(outdir)]) == EXIT_OK
    dest = tmp_path / "back.bin"
    assert main(["decode", str(outdir), str(dest)]) == EXIT_OK
    assert dest.read_bytes() == src.read_bytes()


# ---- bound ------------------------------------------------------------------


def test_bound_prints_quotas(capsys):
    assert main(["bound", "--n", "5", "--k", "2", "--h", "2", "--d", "3", "--l", "3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines == [
        "parameters n=5 k=2 h=2 d=3 l=3",
        "cooperative 8",
        "centralized 6",
        "per-link 1",
    ]


def test_bound_defaults_to_family_subpacketization(capsys):
    assert main(["bound", "--n", "5", "--k", "2", "--h", "2", "--d", "3"]) == EXIT_OK
    assert "l=3" in capsys.readouterr().out.splitlines()[0]


def test_bound_fractional_values(capsys):
    assert main(["bound", "--n", "6", "--k", "2", "--h", "2", "--d", "3", "--l", "4"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "cooperative 32/3"
    assert lines[3] == "per-link 4/3"


def test_bound_inadmissible():
    assert main(["bound", "--n", "5", "--k", "2", "--h", "3", "--d", "3"]) == EXIT_INADMISSIBLE


# ---- bench ------------------------------------------------------------------


def test_bench_single_n_sweep(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--sweep", "5:5", "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    rows = out.read_text().splitlines()
    assert rows[0] == "n,k,h,d,l,coop_measured,coop_bound,central_measured,central_bound,optimal"
    table = [row.split(",") for row in rows[1:]]
    assert all(row[-1] == "true" for row in table)
    target = [row for row in table if row[:4] == ["5", "2", "2", "3"]]
    assert target == [["5", "2", "2", "3", "3", "8", "8", "6", "6", "true"]]


# ---- scenario ---------------------------------------------------------------


def test_scenario_file_runs_and_reports(tmp_path, capsys):
    spec = make_code("fixed_subset", 5, 2, 2, 3, FieldSpec("prime", 7))
    cfg = ClusterConfig(
        spec,
        42,
        (
            {"type": "fail", "nodes": [1, 2]},
            {"type": "repair", "helpers": [3, 4, 5]},
            {"type": "verify"},
        ),
    )
    path = tmp_path / "scenario.json"
    path.write_text(cfg.to_json())
    assert main(["scenario", str(path)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["events"][1]["meter_total"] == 8
    assert doc["events"][2] == {"event": "verify", "ok": True}


def test_scenario_failed_verify_exits_3(tmp_path):
    spec = make_code("fixed_subset", 5, 2, 2, 3, FieldSpec("prime", 7))
    cfg = ClusterConfig(spec, 42, ({"type": "fail", "nodes": [1]}, {"type": "verify"}))
    path = tmp_path / "scenario.json"
    path.write_text(cfg.to_json())
    assert main(["scenario", str(path)]) == EXIT_VERIFY


def test_scenario_bad_config(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text("{\"seed\": 1}")
    assert main(["scenario", str(path)]) == EXIT_INADMISSIBLE


# ---- plumbing ---------------------------------------------------------------


def test_int_list_parsing():
    assert _int_list("1,2,3") == [1, 2, 3]
    assert _int_list("") == []
    with pytest.raises(ValueError):
        _int_list("1,x")


def test_header_parse_rejects_garbage():
    with pytest.raises(ShardFormatError, match="magic"):
        ShardHeader.parse(b"NOPE" + b"\x00" * 40)
    with pytest.raises(ShardFormatError):
        ShardHeader.parse(b"CMDS\x01")
    spec = make_code("fixed_subset", 5, 2, 2, 3, FieldSpec("prime", 7))
    header = ShardHeader(spec, 1, 4, 24, 99)
    parsed, off = ShardHeader.parse(header.to_bytes() + b"payload")
    assert parsed == header
    assert header.to_bytes()[off:] == b""

"""Tensor-archive serialization.

Layout (all integers little-endian):

    magic   b"GCNSR"
    u32     format version
    u32     record count
    record* u32 name_len, name utf-8
            u8  dtype_len, numpy dtype string (e.g. "<f4")
            u8  ndim, u64 * ndim extents
            u64 byte length, raw array bytes (C order)
    u64     meta length, meta JSON utf-8
    u64     blake2b-64 checksum of every preceding byte

The same record section (with empty meta) is the import format for
external feature networks.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .nn import ParameterSet

MAGIC = b"GCNSR"
FORMAT_VERSION = 1


class IntegrityError(ValueError):
    pass


class VersionError(ValueError):
    pass


def _checksum(blob: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def pack_archive(records: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", FORMAT_VERSION, len(records))
    for name, arr in records.items():
        arr = np.ascontiguousarray(arr)
        nb = name.encode("utf-8")
        db = arr.dtype.str.encode("ascii")
        out += struct.pack("<I", len(nb)) + nb
        out += struct.pack("<B", len(db)) + db
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
        raw = arr.tobytes()
        out += struct.pack("<Q", len(raw)) + raw
    mb = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out += struct.pack("<Q", len(mb)) + mb
    out += struct.pack("<Q", _checksum(bytes(out)))
    return bytes(out)


def unpack_archive(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if len(blob) < len(MAGIC) + 16 or blob[: len(MAGIC)] != MAGIC:
        raise IntegrityError("not a tensor archive (bad magic)")
    body, tail = blob[:-8], blob[-8:]
    if _checksum(body) != struct.unpack("<Q", tail)[0]:
        raise IntegrityError("checksum mismatch (truncated or corrupted archive)")
    off = len(MAGIC)
    version, count = struct.unpack_from("<II", blob, off)
    off += 8
    if version != FORMAT_VERSION:
        raise VersionError(f"archive format version {version}, this build reads {FORMAT_VERSION}")
    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + nlen].decode("utf-8")
        off += nlen
        (dlen,) = struct.unpack_from("<B", blob, off)
        off += 1
        dtype = np.dtype(blob[off : off + dlen].decode("ascii"))
        off += dlen
        (ndim,) = struct.unpack_from("<B", blob, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", blob, off)
        off += 8 * ndim
        (blen,) = struct.unpack_from("<Q", blob, off)
        off += 8
        arr = np.frombuffer(blob[off : off + blen], dtype=dtype).reshape(shape).copy()
        off += blen
        records[name] = arr
    (mlen,) = struct.unpack_from("<Q", blob, off)
    off += 8
    meta = json.loads(blob[off : off + mlen].decode("utf-8"))
    return records, meta


def write_archive(path, records: dict[str, np.ndarray], meta: dict | None = None):
    Path(path).write_bytes(pack_archive(records, meta))


def read_archive(path) -> tuple[dict[str, np.ndarray], dict]:
    return unpack_archive(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# parameter-set (de)serialization


def paramset_records(name: str, params: ParameterSet) -> dict[str, np.ndarray]:
    recs = {}
    for pname, p in params.entries.items():
        recs[f"{name}/{pname}"] = p.value.data
        if p.trainable:
            recs[f"{name}/{pname}#m"] = p.adam_m
            recs[f"{name}/{pname}#v"] = p.adam_v
    return recs


def paramset_meta(params: ParameterSet) -> dict:
    return {
        "step_count": params.step_count,
        "order": list(params.entries),
        "non_trainable": [n for n, p in params.entries.items() if not p.trainable],
    }


def restore_paramset(name: str, records: dict[str, np.ndarray], meta: dict) -> ParameterSet:
    ps = ParameterSet()
    frozen = set(meta["non_trainable"])
    for pname in meta["order"]:
        ps.add(pname, records[f"{name}/{pname}"], trainable=pname not in frozen)
        if pname not in frozen:
            ps.entries[pname].adam_m = records[f"{name}/{pname}#m"].copy()
            ps.entries[pname].adam_v = records[f"{name}/{pname}#v"].copy()
    ps.step_count = int(meta["step_count"])
    return ps


def load_external_net(path) -> ParameterSet:
    """Import a feature network from a tensor archive (conv{i}.weight /
    conv{i}.bias records)."""
    records, _ = read_archive(path)
    ps = ParameterSet()
    for name in records:
        ps.add(name, records[name], trainable=False)
    if "conv0.weight" not in ps:
        raise IntegrityError(f"{path} has no conv0.weight record; not a feature network archive")
    return ps

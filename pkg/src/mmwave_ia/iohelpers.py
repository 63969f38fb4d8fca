"""Atomic file writes, content digests and the binary container shared by dataset and model files."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_json(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def pack_container(magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    """``magic | u64 LE header length | JSON header | concatenated little-endian arrays``."""
    blobs, entries, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        data = le.tobytes()
        entries.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    payload = b"".join(blobs)
    header = dict(header, arrays=entries, data_sha256=hashlib.sha256(payload).hexdigest())
    hbytes = json.dumps(header, sort_keys=True).encode()
    return magic + len(hbytes).to_bytes(8, "little") + hbytes + payload


def read_container(path: str | Path, magic: bytes, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a magic + JSON-header + little-endian blob container."""
    raw = Path(path).read_bytes()
    if raw[: len(magic)] != magic:
        raise FormatError(f"{path}: not a {kind} file (bad magic)")
    pos = len(magic)
    if len(raw) < pos + 8:
        raise FormatError(f"{path}: truncated {kind} header")
    hlen = int.from_bytes(raw[pos : pos + 8], "little")
    pos += 8
    try:
        header = json.loads(raw[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupted {kind} header: {exc}") from None
    if not isinstance(header, dict) or "arrays" not in header:
        raise FormatError(f"{path}: corrupted {kind} header")
    payload = raw[pos + hlen :]
    try:
        expected = sum(int(e["nbytes"]) for e in header["arrays"])
        if len(payload) < expected:
            raise FormatError(f"{path}: truncated {kind} file ({len(payload)} of {expected} data bytes)")
        if hashlib.sha256(payload[:expected]).hexdigest() != header.get("data_sha256"):
            raise FormatError(f"{path}: {kind} data checksum mismatch")
        arrays = {}
        for e in header["arrays"]:
            chunk = payload[e["offset"] : e["offset"] + e["nbytes"]]
            arrays[e["name"]] = np.frombuffer(chunk, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed {kind} array table: {exc}") from None
    return header, arrays

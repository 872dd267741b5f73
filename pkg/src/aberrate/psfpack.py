"""PSFPACK v1 kernel file format.

Little-endian layout:

    magic   4s   b"PSFK"
    version u16  1
    channels u16
    height  u32
    width   u32
    pitch   f64  micrometers; 0.0 means "normalized" (no physical pitch)
    prov_len u32
    provenance  UTF-8 JSON, prov_len bytes
    samples     channel-major float32, channels*height*width values

Provenance JSON is serialized canonically (sorted keys, compact
separators) so that write -> read -> write round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .psf import Psf

MAGIC = b"PSFK"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIdI")


def psfpack_bytes(psf: Psf) -> bytes:
    prov = json.dumps(
        {"normalized": bool(psf.normalized), "provenance": psf.provenance},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    channels, height, width = psf.data.shape
    pitch = 0.0 if psf.pitch_um is None else float(psf.pitch_um)
    header = _HEADER.pack(MAGIC, VERSION, channels, height, width, pitch, len(prov))
    samples = np.ascontiguousarray(psf.data, dtype="<f4").tobytes()
    return header + prov + samples


def write_psfpack(psf: Psf, path: str | Path) -> None:
    Path(path).write_bytes(psfpack_bytes(psf))


def read_psfpack(path: str | Path) -> Psf:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated PSFPACK header")
    magic, version, channels, height, width, pitch, prov_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported PSFPACK version {version}")
    offset = _HEADER.size
    prov = json.loads(raw[offset : offset + prov_len].decode("utf-8"))
    offset += prov_len
    count = channels * height * width
    samples = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    if samples.size != count:
        raise ValueError(f"{path}: truncated sample data")
    data = samples.astype(np.float64).reshape(channels, height, width)
    return Psf(
        data=data,
        pitch_um=None if pitch == 0.0 else pitch,
        normalized=bool(prov.get("normalized", False)),
        provenance=prov.get("provenance", {}),
    )

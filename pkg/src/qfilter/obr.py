"""One-bit record files (OBR1).

Layout, all little-endian:

    bytes 0..3   magic ``OBR1``
    u32          version (= 1)
    u32          n_channels
    u64          n_steps
    f64          dt
    payload      ceil(n_channels * n_steps / 8) bytes

Payload bits are ordered step-major then channel, MSB-first within each
byte; a 1 bit encodes sign +1.  Unused trailing bits are zero.  One file
holds one trajectory's record; a filter replayed from it reproduces the
in-line filter state bit-exactly (same model, dt, and policy).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import RecordFormatError

MAGIC = b"OBR1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQd")


def write_obr_file(bits: np.ndarray, dt: float, path) -> None:
    """Write a (n_steps, n_channels) array of +/-1 signs to ``path``."""
    bits = np.asarray(bits)
    if bits.ndim == 1:
        bits = bits[:, None]
    if bits.ndim != 2:
        raise ValueError(f"bits must be (n_steps, n_channels), got shape {bits.shape}")
    if not np.all(np.abs(bits) == 1):
        raise ValueError("bits must be +1 or -1")
    n_steps, n_channels = bits.shape
    payload = np.packbits((bits.ravel() > 0).astype(np.uint8), bitorder="big")
    header = _HEADER.pack(MAGIC, VERSION, n_channels, n_steps, float(dt))
    Path(path).write_bytes(header + payload.tobytes())


def read_obr_file(path) -> tuple[np.ndarray, float]:
    """Read back a record file; returns (bits (n_steps, n_channels) int8, dt)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RecordFormatError(f"{path}: too short for an OBR1 header")
    magic, version, n_channels, n_steps, dt = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RecordFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise RecordFormatError(f"{path}: unsupported version {version}")
    n_bits = n_channels * n_steps
    n_payload = (n_bits + 7) // 8
    payload = raw[_HEADER.size :]
    if len(payload) != n_payload:
        raise RecordFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {n_payload}"
        )
    unpacked = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="big")
    bits = np.where(unpacked[:n_bits] > 0, 1, -1).astype(np.int8)
    return bits.reshape(n_steps, n_channels), float(dt)

"""Binary checkpoint format.

Layout (all little-endian)::

    magic      8 bytes  b"DRSIMLST"
    version    u32
    n_layers   u32
    per layer  u32 input width, u32 hidden width
    lookback   u32
    horizon    u32
    norm       f64 min, f64 max
    arrays     f64, per layer W_i W_f W_g W_o, U_i U_f U_g U_o, b_i b_f b_g b_o,
               then head weights (hidden x horizon), head bias; row-major
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import DegenerateRangeError, ModelLoadError
from .data import NormParams
from .lstm import ForecastModel, zero_model

MAGIC = b"DRSIMLST"
VERSION = 1


def dumps(model: ForecastModel) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(model.layers))]
    for layer in model.layers:
        parts.append(struct.pack("<II", layer.input_size, layer.hidden_size))
    parts.append(struct.pack("<II", model.lookback, model.horizon))
    parts.append(struct.pack("<dd", model.norm.min, model.norm.max))
    for a in model.arrays():
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> ForecastModel:
    try:
        if blob[:8] != MAGIC:
            raise ModelLoadError("bad magic; not a drsim checkpoint")
        pos = 8
        version, n_layers = struct.unpack_from("<II", blob, pos)
        pos += 8
        if version != VERSION:
            raise ModelLoadError(f"unsupported checkpoint version {version}")
        if n_layers < 1:
            raise ModelLoadError("checkpoint has no layers")
        widths = []
        for _ in range(n_layers):
            widths.append(struct.unpack_from("<II", blob, pos))
            pos += 8
        lookback, horizon = struct.unpack_from("<II", blob, pos)
        pos += 8
        lo, hi = struct.unpack_from("<dd", blob, pos)
        pos += 16
    except struct.error as exc:
        raise ModelLoadError(f"truncated header: {exc}") from None

    prev = 1
    for in_w, _h in widths:
        if in_w != prev:
            raise ModelLoadError(f"layer input width {in_w} does not match previous width {prev}")
        prev = _h
    try:
        norm = NormParams(lo, hi)
    except DegenerateRangeError as exc:
        raise ModelLoadError(f"bad normalization constants: {exc}") from None

    skeleton = zero_model([h for _, h in widths], norm, lookback, horizon)
    expected = 8 * skeleton.n_params()
    if len(blob) - pos != expected:
        raise ModelLoadError(f"expected {expected} payload bytes, found {len(blob) - pos}")
    flat = np.frombuffer(blob, dtype="<f8", offset=pos).astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise ModelLoadError("checkpoint contains non-finite parameters")
    return skeleton.with_flat(flat)


def save(model: ForecastModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load(path) -> ForecastModel:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ModelLoadError(f"cannot read {path}: {exc}") from None
    return loads(blob)

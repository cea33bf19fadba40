"""Binary weight files. Layouts are described in docs/formats.md.

Both formats are a little-endian header followed by float64 data in C
order, so any language with a byte reader can load identical weights.
"""

from __future__ import annotations

import struct

import numpy as np

from .micronet import MicroNetParams
from .temporal import EtscParams

ETSC_MAGIC = b"ETSC"
MODEL_MAGIC = b"EVPM"
VERSION = 1

_ETSC_HEADER = struct.Struct("<4sHIIIII")  # magic, version, C, k1, k2, d1, d2
_MODEL_HEADER = struct.Struct("<4sHIIII")  # magic, version, J, W_bins, H_bins, n_tensors


class WeightFormatError(ValueError):
    pass


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def etsc_to_bytes(params: EtscParams) -> bytes:
    k = params.kernel_size
    d1, d2 = params.dilations
    head = _ETSC_HEADER.pack(ETSC_MAGIC, VERSION, params.channels, k, k, d1, d2)
    return head + b"".join(_f64(a) for a in (params.w1, params.b1, params.w2, params.b2))


def etsc_from_bytes(data: bytes) -> EtscParams:
    if len(data) < _ETSC_HEADER.size:
        raise WeightFormatError("truncated ETSC header")
    magic, version, C, k1, k2, d1, d2 = _ETSC_HEADER.unpack_from(data)
    if magic != ETSC_MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}, expected {ETSC_MAGIC!r}")
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    if k1 != k2:
        raise WeightFormatError("both convolutions must share one kernel size")
    n = 2 * (C * C * k1 + C)
    body = data[_ETSC_HEADER.size:]
    if len(body) != 8 * n:
        raise WeightFormatError(f"expected {8 * n} data bytes, got {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    sizes = [C * C * k1, C, C * C * k1, C]
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    return EtscParams(parts[0].reshape(C, C, k1), parts[1], parts[2].reshape(C, C, k1), parts[3],
                      kernel_size=k1, dilations=(d1, d2))


def model_to_bytes(params: MicroNetParams, etsc: EtscParams | None = None) -> bytes:
    """Backbone + head tensors, optionally followed by ETSC tensors (``etsc.*``)."""
    tensors = dict(params.arrays())
    if etsc is not None:
        if etsc.dilations != (1, 2) or etsc.kernel_size != 3:
            raise WeightFormatError("model files only carry the default ETSC geometry")
        tensors.update({f"etsc.{k}": v for k, v in etsc.arrays().items()})
    out = [_MODEL_HEADER.pack(MODEL_MAGIC, VERSION, params.J, params.W_bins, params.H_bins,
                              len(tensors))]
    for name, a in tensors.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
    out.extend(_f64(a) for a in tensors.values())
    return b"".join(out)


def model_from_bytes(data: bytes) -> tuple[MicroNetParams, EtscParams | None]:
    if len(data) < _MODEL_HEADER.size:
        raise WeightFormatError("truncated model header")
    magic, version, J, W_bins, H_bins, n = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    off = _MODEL_HEADER.size
    manifest = []
    try:
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", data, off)
            name = data[off + 2:off + 2 + ln].decode("utf-8")
            off += 2 + ln
            (ndim,) = struct.unpack_from("<B", data, off)
            shape = struct.unpack_from(f"<{ndim}I", data, off + 1)
            off += 1 + 4 * ndim
            manifest.append((name, shape))
    except struct.error:
        raise WeightFormatError("truncated tensor manifest") from None
    tensors = {}
    for name, shape in manifest:
        size = int(np.prod(shape))
        end = off + 8 * size
        if end > len(data):
            raise WeightFormatError(f"tensor {name!r} runs past end of file")
        tensors[name] = np.frombuffer(data[off:end], dtype="<f8").astype(np.float64).reshape(shape)
        off = end
    if off != len(data):
        raise WeightFormatError(f"{len(data) - off} trailing bytes")
    etsc = None
    if "etsc.w1" in tensors:
        etsc = EtscParams(*(tensors.pop(f"etsc.{k}") for k in ("w1", "b1", "w2", "b2")))
    return MicroNetParams.from_arrays(tensors, J, W_bins, H_bins), etsc


def save_model(path, params: MicroNetParams, etsc: EtscParams | None = None) -> None:
    with open(path, "wb") as f:
        f.write(model_to_bytes(params, etsc))


def load_model(path):
    with open(path, "rb") as f:
        return model_from_bytes(f.read())

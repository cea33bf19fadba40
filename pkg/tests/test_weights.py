import struct

import numpy as np
import pytest

from evpose.micronet import MicroNetParams
from evpose.temporal import EtscParams
from evpose.weights import (
    WeightFormatError,
    etsc_from_bytes,
    etsc_to_bytes,
    load_model,
    model_from_bytes,
    model_to_bytes,
    save_model,
)


def test_etsc_layout():
    p = EtscParams.init(3, seed=0)
    raw = etsc_to_bytes(p)
    header = struct.unpack_from("<4sHIIIII", raw)
    assert header == (b"ETSC", 1, 3, 3, 3, 1, 2)
    body = np.frombuffer(raw[struct.calcsize("<4sHIIIII"):], "<f8")
    assert body.size == 2 * (27 + 3)
    np.testing.assert_array_equal(body[:27], p.w1.reshape(-1))
    np.testing.assert_array_equal(body[27:30], p.b1)


def test_etsc_round_trip_bit_exact():
    p = EtscParams.init(5, seed=1)
    q = etsc_from_bytes(etsc_to_bytes(p))
    for k in p.arrays():
        assert np.array_equal(p.arrays()[k], q.arrays()[k])


@pytest.mark.parametrize("mutate, match", [
    (lambda r: b"XXXX" + r[4:], "magic"),
    (lambda r: r[:10], "truncated"),
    (lambda r: r[:-8], "data bytes"),
    (lambda r: r[:4] + struct.pack("<H", 9) + r[6:], "version"),
])
def test_etsc_errors(mutate, match):
    raw = etsc_to_bytes(EtscParams.init(2, seed=0))
    with pytest.raises(WeightFormatError, match=match):
        etsc_from_bytes(mutate(raw))


def test_model_round_trip(tmp_path):
    p = MicroNetParams.init(0, C=8, hidden=(6, 7), J=2, W_bins=5, H_bins=4)
    e = EtscParams.init(8, seed=1)
    path = tmp_path / "m.evpm"
    save_model(path, p, e)
    p2, e2 = load_model(path)
    assert (p2.J, p2.W_bins, p2.H_bins) == (2, 5, 4)
    for k, v in p.arrays().items():
        assert np.array_equal(v, p2.arrays()[k])
    for k, v in e.arrays().items():
        assert np.array_equal(v, e2.arrays()[k])
    p3, e3 = model_from_bytes(model_to_bytes(p))
    assert e3 is None and len(p3.layers) == 3


def test_model_errors():
    raw = model_to_bytes(MicroNetParams.init(0, C=4, hidden=(3,), J=1, W_bins=2, H_bins=2))
    with pytest.raises(WeightFormatError, match="trailing"):
        model_from_bytes(raw + b"\0")
    with pytest.raises(WeightFormatError):
        model_from_bytes(raw[:-3])
    with pytest.raises(WeightFormatError, match="magic"):
        model_from_bytes(b"ETSC" + raw[4:])

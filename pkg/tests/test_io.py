import json

import numpy as np
import pytest

from isorank import io as iio
from isorank.sampling import NoiseModel, poissonize, subsample_batches
from isorank.synth import gen_isotonic


@pytest.fixture
def sample():
    inst = gen_isotonic(5, 4, seed=0, lam=3.0)
    stream = poissonize(inst, NoiseModel(), 0)
    return inst, stream, subsample_batches(stream, 2, 0)


def test_instance_json_roundtrip(sample, tmp_path):
    inst, stream, _ = sample
    path = tmp_path / "inst.json"
    iio.save_json(iio.instance_to_dict(inst, stream), path)
    doc = iio.load_json(path)
    assert doc["schema"] == "isorank/1" and doc["type"] == "instance"
    back = iio.instance_from_dict(doc)
    assert np.array_equal(back.M, inst.M) and np.array_equal(back.pi_star, inst.pi_star)
    s2 = iio.stream_from_dict(doc)
    assert np.array_equal(s2.counts(), stream.counts()) and np.array_equal(s2.values, stream.values)


def test_stream_json_roundtrip(sample):
    _, stream, _ = sample
    back = iio.stream_from_dict(json.loads(iio.dumps(iio.stream_to_dict(stream))))
    assert (back.n, back.d, back.lam) == (stream.n, stream.d, stream.lam)
    assert np.array_equal(back.rows, stream.rows) and np.array_equal(back.values, stream.values)


def test_batches_json_roundtrip_exact(sample):
    _, _, b = sample
    back = iio.batches_from_dict(json.loads(iio.dumps(iio.batches_to_dict(b))))
    assert np.array_equal(back.Y, b.Y)
    assert back.B.dtype == bool and np.array_equal(back.B, b.B)
    assert np.array_equal(back.r, b.r) and back.lambda0 == b.lambda0


@pytest.mark.parametrize("which", [0, 1, 2])
def test_npz_roundtrip_exact(sample, tmp_path, which):
    obj = sample[which]
    path = tmp_path / "obj.npz"
    iio.save_npz(path, obj)
    back = iio.load_npz(path)
    assert type(back) is type(obj)
    if which == 0:
        assert np.array_equal(back.M, obj.M) and np.array_equal(back.pi_star, obj.pi_star)
    elif which == 1:
        assert np.array_equal(back.counts(), obj.counts()) and np.array_equal(back.values, obj.values)
    else:
        assert back.B.dtype == obj.B.dtype and back.r.dtype == obj.r.dtype
        assert np.array_equal(back.B, obj.B) and np.array_equal(back.r, obj.r)
        assert np.array_equal(back.Y, obj.Y)


def test_matrix_doc():
    M = np.array([[0.25, 0.5]])
    doc = iio.matrix_to_dict(M, route="iso")
    assert doc["route"] == "iso"
    assert np.array_equal(iio.matrix_from_dict(doc), M)


def test_schema_errors(tmp_path):
    with pytest.raises(iio.SchemaError):
        iio.instance_from_dict({"schema": "isorank/0", "type": "instance"})
    with pytest.raises(iio.SchemaError):
        iio.matrix_from_dict({"schema": "isorank/1", "type": "stream"})
    with pytest.raises(TypeError):
        iio.save_npz(tmp_path / "x.npz", object())
    np.savez(tmp_path / "bad.npz", schema="other", type="instance")
    with pytest.raises(iio.SchemaError):
        iio.load_npz(tmp_path / "bad.npz")

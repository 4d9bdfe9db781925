import struct

import numpy as np
import pytest

from qalign import container
from qalign.container import TensorRecord
from qalign.encoder import TokenizerConfig, collect_calibration, encode_corpus
from qalign.errors import CalibrationError, FormatError
from qalign.model import DYNAMIC, STATIC, EncoderModel, QuantLayer, generate_model, quantize_model
from qalign.quant import CalibrationStats, QuantizedMatrix, SmoothingConfig


def _cos_rows(a, b):
    a, b = a.astype(np.float64), b.astype(np.float64)
    return (a * b).sum(1) / np.linalg.norm(a, axis=1) / np.linalg.norm(b, axis=1)


def test_generate_model_is_seeded():
    a = generate_model(vocab_size=64, dim=8, n_layers=1, seed=5)
    b = generate_model(vocab_size=64, dim=8, n_layers=1, seed=5)
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != generate_model(vocab_size=64, dim=8, n_layers=1, seed=6).to_bytes()
    assert not a.embedding[0].any()
    assert np.abs(a.layers[0].weight).max() <= 1 / np.sqrt(8)


def test_outlier_channels_exceed_band():
    m = generate_model(vocab_size=256, dim=16, seed=1, outlier_channels=2, outlier_scale=6.0)
    peaks = np.abs(m.embedding).max(axis=0)
    assert (peaks > 2.5).sum() == 2
    assert (peaks <= 1.0).sum() == 14


def test_container_round_trip_bit_exact():
    recs = [
        TensorRecord("a", np.arange(6, dtype=np.float32).reshape(2, 3)),
        TensorRecord("b", np.array([[-127, 5]], dtype=np.int8), [0.5, 0.25]),
        TensorRecord("é", np.zeros((0,), dtype=np.float32)),
    ]
    buf = container.dumps(recs)
    assert buf[:4] == b"QALN" and struct.unpack("<H", buf[4:6])[0] == 1
    back = container.loads(buf)
    assert [r.name for r in back] == ["a", "b", "é"]
    for r, s in zip(recs, back):
        assert r.data.dtype == s.data.dtype
        np.testing.assert_array_equal(r.data, s.data)
        np.testing.assert_array_equal(r.scales, s.scales)
    assert container.dumps(back) == buf


@pytest.mark.parametrize("mutate", [lambda b: b"XXXX" + b[4:], lambda b: b[:-1], lambda b: b + b"\0"])
def test_container_rejects_corruption(mutate):
    buf = container.dumps([TensorRecord("a", np.ones((2, 2), np.float32))])
    with pytest.raises(FormatError):
        container.loads(mutate(buf))


def _quantized(model, texts, cfg, **kw):
    stats = collect_calibration(model, texts, cfg)
    return quantize_model(model, SmoothingConfig(kw.pop("alpha", 0.5)), stats, **kw)


def test_model_file_round_trip(tmp_path, small_model, small_cfg):
    for m in (small_model, _quantized(small_model, ["a b c"], small_cfg)):
        path = tmp_path / "m.bin"
        m.save(path)
        back = EncoderModel.load(path)
        assert back.to_bytes() == m.to_bytes()
        assert back.seed == m.seed and back.quantized == m.quantized
        e1 = encode_corpus(m, ["x y z"], small_cfg)
        np.testing.assert_array_equal(encode_corpus(back, ["x y z"], small_cfg), e1)


def test_dynamic_policy_round_trip(small_model, small_cfg):
    q = _quantized(small_model, ["a b"], small_cfg, act_policy=DYNAMIC)
    assert q.act_policy == DYNAMIC
    assert EncoderModel.from_bytes(q.to_bytes()).act_policy == DYNAMIC


def test_quantized_size_below_half():
    m = generate_model(vocab_size=1024, dim=32, n_layers=2)
    q = _quantized(m, ["one two"], TokenizerConfig(max_length=8, vocab_size=1024))
    assert len(q.to_bytes()) < 0.5 * len(m.to_bytes())


def test_quantize_model_structure(small_model, small_cfg):
    q = _quantized(small_model, ["a b c"], small_cfg)
    assert isinstance(q.embedding, QuantizedMatrix)
    assert all(isinstance(l, QuantLayer) and l.act_scale is not None for l in q.layers)
    assert q.act_policy == STATIC
    keep = _quantized(small_model, ["a"], small_cfg, quantize_embedding=False)
    assert isinstance(keep.embedding, np.ndarray)


def test_alpha_zero_identity_stats_is_plain_w8a8(small_model):
    stats = [CalibrationStats(np.ones(16), np.ones(16), f"layers.{i}") for i in range(2)]
    q = quantize_model(small_model, SmoothingConfig(0.0), stats)
    for l in q.layers:
        np.testing.assert_array_equal(l.smooth, np.ones(16, np.float32))


def test_missing_stats_names_layer(small_model):
    stats = [CalibrationStats(np.ones(16), np.ones(16), "layers.0")]
    with pytest.raises(CalibrationError, match="layers.1"):
        quantize_model(small_model, SmoothingConfig(), stats)


def test_quantized_embeddings_close_to_fp(small_model, small_cfg):
    texts = ["heart attack", "kidney stone pain", "fever and cough", "a b c d e f"]
    q = _quantized(small_model, texts, small_cfg)
    fp = encode_corpus(small_model, texts, small_cfg)
    assert _cos_rows(fp, encode_corpus(q, texts, small_cfg)).min() >= 0.99


def test_per_tensor_weight_variant(small_model, small_cfg):
    q = _quantized(small_model, ["a b"], small_cfg, per_tensor_weights=True)
    for l in q.layers:
        assert np.unique(l.weight.scales).size == 1

"""Smoke tests for the python module: each major surface gets one
happy-path exercise against values the C++ suites pin down in depth."""

import math

import numpy as np
import pytest

import glora


def test_jamo_arithmetic():
    t = glora.decompose_syllable("경")
    assert (t.choseong, t.jungseong, t.jongseong) == (0, 6, 21)
    assert glora.compose_syllable(0, 6, 21) == "경"
    assert glora.to_jamo_sequence("경복궁") == "ㄱㅕㅇㅂㅗㄱㄱㅜㅇ"
    with pytest.raises(ValueError):
        glora.decompose_syllable("A")


def test_token_table_round_trip():
    table = glora.TokenTable()
    table.extend(["I go to 경복궁"])
    ids = table.encode("I go to 경복궁")
    assert table.decode(ids) == "I go to 경복궁"
    assert len(table) == 4 + len(set("I go to 경복궁"))


def test_error_rates():
    row = glora.rate("I go to 경복궁", "I go to Gyeongboggung", unit="wer")
    assert row["rate"] == pytest.approx(0.25)
    jer = glora.rate("경", "감", unit="jer")
    assert jer["rate"] == pytest.approx(2.0 / 3.0)
    assert glora.edit_distance(["a", "b"], ["a", "b"]) == (0, 0, 0)


def test_lora_identity_and_merge():
    rng = np.random.default_rng(0)
    w0 = rng.normal(size=(4, 3))
    a = rng.normal(size=(2, 3))
    x = rng.normal(size=3)
    h = glora.lora_forward(x, w0, a, np.zeros((4, 2)))
    np.testing.assert_allclose(h, w0 @ x, atol=1e-12)

    b = rng.normal(size=(4, 2))
    merged = glora.merge_lora(w0, a, b, scale=0.5)
    np.testing.assert_allclose(merged, w0 + 0.5 * b @ a, atol=1e-12)
    np.testing.assert_allclose(glora.lora_forward(x, w0, a, b, scale=0.5), merged @ x, atol=1e-12)


def test_glora_identity_at_init():
    cfg = glora.ModelConfig()
    cfg.seed = 3
    model = glora.SeqModel.init(cfg)
    features = np.random.default_rng(1).normal(size=(10, 16))
    base = glora.greedy_decode(model, features)
    for kind in ["lora", "glora1", "glora2", "glora3"]:
        adapter = glora.attach(model, glora.AdapterSpec(kind=kind, rank=2, seed=5))
        assert glora.greedy_decode(model, features, adapter) == base


def test_train_and_serve_loopback(tmp_path):
    cfg = glora.ModelConfig()
    cfg.seed = 11
    model = glora.SeqModel.init(cfg)
    corpus = glora.gen_corpus(glora.SynthConfig(), "mono-a", 8, 21)

    tc = glora.TrainConfig()
    tc.steps = 5
    report = glora.train_full(model, corpus, tc)
    assert math.isfinite(report.final_loss)

    adapter = glora.attach(model, glora.AdapterSpec(rank=2, seed=1))
    tc.steps = 3
    before = model.params_hash()
    glora.train_adapter(model, adapter, corpus, tc)
    assert model.params_hash() == before  # base never moves

    bundle_path = str(tmp_path / "adapter.bundle")
    glora.save_bundle_file(adapter, model.fingerprint(), bundle_path)

    server = glora.Server(model)
    server.start("127.0.0.1", 0)
    try:
        tokens, _ = glora.client_infer("127.0.0.1", server.port, bundle_path,
                                       np.asarray(corpus[0].features))
        assert tokens == glora.greedy_decode(model, corpus[0].features, adapter)
        audit = server.audit()
        assert audit["live_adapter_views"] == 0
        assert audit["retained_request_bytes"] == 0
    finally:
        server.stop()


def test_bundle_bytes_metadata():
    cfg = glora.ModelConfig()
    model = glora.SeqModel.init(cfg)
    adapter = glora.attach(model, glora.AdapterSpec(kind="glora3", rank=2))
    info = glora.bundle_info(glora.bundle_bytes(adapter, model.fingerprint()))
    assert info["kind"] == "glora3"
    assert info["rank"] == 2
    assert info["fingerprint"] == model.fingerprint()

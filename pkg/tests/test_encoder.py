"""Tokenizer, encoders, and checkpoint format."""

import json

import numpy as np
import pytest

from uiq.encoder import (
    BadDimensions,
    CHECKPOINT_MAGIC,
    EncoderConfig,
    TOKEN_END,
    TOKEN_START,
    encode_image,
    encode_image_batch,
    encode_text,
    encode_text_batch,
    init_params,
    load_checkpoint,
    save_checkpoint,
    tensor_shapes,
    tokenize,
)

TINY = EncoderConfig(d_model=16, depth=1, heads=4, embed_dim=8, vocab_size=64, max_tokens=16,
                     patch_size=8, image_size=32)


@pytest.fixture(scope="module")
def params():
    return init_params(TINY, seed=0)


def test_tokenize_empty():
    assert tokenize("") == [TOKEN_START, TOKEN_END]


def test_tokenize_deterministic():
    text = "Login screen, with PUNCTUATION!  and   spaces"
    assert tokenize(text) == tokenize(text)


def test_tokenize_splits_on_whitespace_and_punctuation():
    assert tokenize("a,b") == tokenize("a b")
    assert tokenize("Hello World") == tokenize("hello   world")


def test_tokenize_truncates_to_77():
    text = " ".join(f"w{i}" for i in range(100))
    ids = tokenize(text)
    assert len(ids) == 77
    assert ids[0] == TOKEN_START


def test_tokenize_ids_in_vocab():
    ids = tokenize("some words here", vocab_size=64)
    assert all(0 <= t < 64 for t in ids)


def test_text_embedding_unit_norm(params):
    rng = np.random.default_rng(1)
    for _ in range(5):
        words = " ".join(rng.choice(list("abcdefgh"), size=6))
        emb = encode_text(params, tokenize(words, 64, 16))
        assert np.linalg.norm(emb) == pytest.approx(1.0, abs=1e-5)


def test_text_embedding_deterministic_and_distinct(params):
    t1 = tokenize("login screen", 64, 16)
    t2 = tokenize("music player", 64, 16)
    assert np.array_equal(encode_text(params, t1), encode_text(params, t1))
    assert float(encode_text(params, t1) @ encode_text(params, t2)) < 1 - 1e-6


def test_image_embedding_unit_norm_and_distinct(params):
    black = np.zeros((32, 32, 3), dtype=np.uint8)
    white = np.full((32, 32, 3), 255, dtype=np.uint8)
    eb, ew = encode_image(params, black), encode_image(params, white)
    assert np.linalg.norm(eb) == pytest.approx(1.0, abs=1e-5)
    assert not np.allclose(eb, ew)


def test_image_bad_dimensions(params):
    with pytest.raises(BadDimensions):
        encode_image(params, np.zeros((30, 32, 3), dtype=np.uint8))
    with pytest.raises(BadDimensions):
        encode_image_batch(params, np.zeros((1, 32, 30, 3), dtype=np.uint8))


def test_batch_matches_single(params):
    rng = np.random.default_rng(2)
    imgs = rng.integers(0, 256, (3, 32, 32, 3), dtype=np.uint8)
    batch = encode_image_batch(params, imgs)
    for i in range(3):
        single = encode_image(params, imgs[i])
        np.testing.assert_allclose(batch[i], single, atol=1e-6)


def test_text_batch_padding_invariance(params):
    # a short text embeds the same whether batched with a longer one or alone
    short = tokenize("abc", 64, 16)
    long = tokenize("a b c d e f g h", 64, 16)
    alone = encode_text_batch(params, [short])[0]
    together = encode_text_batch(params, [short, long])[0]
    np.testing.assert_allclose(alone, together, atol=1e-5)


def test_checkpoint_roundtrip(tmp_path, params):
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.config == TINY
    for name, tensor in params.tensors.items():
        np.testing.assert_array_equal(loaded.tensors[name], tensor)
    # byte-stable: saving the loaded params reproduces the file exactly
    again = tmp_path / "again.ckpt"
    save_checkpoint(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_checkpoint_header_format(tmp_path, params):
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
    assert header["magic"] == CHECKPOINT_MAGIC == "UICLIP-TOY"
    assert header["d_model"] == 16 and header["d"] == 8 and header["t"] == 1
    assert header["heads"] == 4 and header["vocab"] == 64
    declared = [t["name"] for t in header["tensors"]]
    assert declared == list(tensor_shapes(TINY))
    # blob length matches the declared tensor sizes (little-endian f32)
    blob = path.read_bytes().split(b"\n", 1)[1]
    expected = sum(int(np.prod(t["shape"])) if t["shape"] else 1 for t in header["tensors"]) * 4
    assert len(blob) == expected


def test_checkpoint_rejects_other_files(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b'{"magic": "SOMETHING"}\n')
    with pytest.raises(ValueError):
        load_checkpoint(bad)


def test_embeddings_survive_checkpoint(tmp_path, params):
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    toks = tokenize("scores must match exactly", 64, 16)
    np.testing.assert_array_equal(encode_text(params, toks), encode_text(loaded, toks))


def test_init_seeded_determinism():
    a = init_params(TINY, seed=5)
    b = init_params(TINY, seed=5)
    c = init_params(TINY, seed=6)
    assert all(np.array_equal(a.tensors[k], b.tensors[k]) for k in a.tensors)
    assert any(not np.array_equal(a.tensors[k], c.tensors[k]) for k in a.tensors)


def test_init_logit_scale():
    p = init_params(TINY, seed=0)
    assert np.exp(p.tau) == pytest.approx(14.3, rel=1e-5)

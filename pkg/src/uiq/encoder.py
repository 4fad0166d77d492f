"""Toy dual encoder: image patches and hashed text tokens into one unit sphere.

Two small pre-LN transformer towers (default: 2 blocks, width 128, 4 heads)
project 32x32 image patches and hashed word tokens into a shared embedding
space; outputs are L2-normalized. Forward and backward passes are written
out explicitly in numpy so gradients can be verified against finite
differences, and the whole model can run in a float64 shadow mode.

Checkpoints are a single JSON header line (magic "UICLIP-TOY") followed by
raw little-endian float32 tensor blobs in the header's declared order.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "BadDimensions",
    "EncoderConfig",
    "DualEncoderParams",
    "TOKEN_START",
    "TOKEN_END",
    "tokenize",
    "init_params",
    "encode_text",
    "encode_image",
    "encode_text_batch",
    "encode_image_batch",
    "text_backward",
    "image_backward",
    "patchify",
    "pixels_to_float",
    "new_grads",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
    "INIT_LOGIT_SCALE",
    "MAX_LOGIT_SCALE",
]


class BadDimensions(Exception):
    pass


CHECKPOINT_MAGIC = "UICLIP-TOY"
CHECKPOINT_VERSION = 1

TOKEN_START = 0
TOKEN_END = 1

INIT_LOGIT_SCALE = 14.3  # exp(tau) at init
MAX_LOGIT_SCALE = 100.0


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 128
    depth: int = 2
    heads: int = 4
    embed_dim: int = 128
    vocab_size: int = 8192
    max_tokens: int = 77
    patch_size: int = 32
    image_size: int = 224

    @property
    def n_patches(self) -> int:
        side = self.image_size // self.patch_size
        return side * side

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3


@dataclass
class DualEncoderParams:
    config: EncoderConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return float(self.tensors["tau"][()])

    def copy(self) -> "DualEncoderParams":
        return DualEncoderParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "DualEncoderParams":
        return DualEncoderParams(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.md5(token.encode()).digest()[:8], "little")


def tokenize(text: str, vocab_size: int = 8192, max_len: int = 77) -> list[int]:
    """Lowercase, split on whitespace/punctuation, hash into the vocabulary."""
    words = re.findall(r"[a-z0-9]+", text.lower())
    ids = [TOKEN_START] + [2 + _stable_hash(w) % (vocab_size - 2) for w in words] + [TOKEN_END]
    return ids[:max_len]


# ---------------------------------------------------------------------------
# Parameters


def _block_names(prefix: str, i: int) -> list[str]:
    b = f"{prefix}.blocks.{i}"
    return [
        f"{b}.ln1.g", f"{b}.ln1.b",
        f"{b}.attn.wq", f"{b}.attn.bq",
        f"{b}.attn.wk", f"{b}.attn.bk",
        f"{b}.attn.wv", f"{b}.attn.bv",
        f"{b}.attn.wo", f"{b}.attn.bo",
        f"{b}.ln2.g", f"{b}.ln2.b",
        f"{b}.mlp.w1", f"{b}.mlp.b1",
        f"{b}.mlp.w2", f"{b}.mlp.b2",
    ]


def tensor_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Declared checkpoint order: every tensor, name -> shape."""
    dm, d = config.d_model, config.embed_dim
    hidden = 4 * dm
    shapes: dict[str, tuple[int, ...]] = {}
    shapes["img.patch.w"] = (config.patch_dim, dm)
    shapes["img.patch.b"] = (dm,)
    shapes["img.pos"] = (config.n_patches, dm)
    for i in range(config.depth):
        for name in _block_names("img", i):
            shapes[name] = _param_shape(name, dm, hidden)
    shapes["img.ln_post.g"] = (dm,)
    shapes["img.ln_post.b"] = (dm,)
    shapes["img.proj"] = (dm, d)
    shapes["txt.tok"] = (config.vocab_size, dm)
    shapes["txt.pos"] = (config.max_tokens, dm)
    for i in range(config.depth):
        for name in _block_names("txt", i):
            shapes[name] = _param_shape(name, dm, hidden)
    shapes["txt.ln_post.g"] = (dm,)
    shapes["txt.ln_post.b"] = (dm,)
    shapes["txt.proj"] = (dm, d)
    shapes["tau"] = ()
    return shapes


def _param_shape(name: str, dm: int, hidden: int) -> tuple[int, ...]:
    leaf = name.rsplit(".", 2)[-2:]
    group, tensor = leaf
    if group in ("ln1", "ln2"):
        return (dm,)
    if group == "attn":
        return (dm, dm) if tensor.startswith("w") else (dm,)
    if group == "mlp":
        return {"w1": (dm, hidden), "b1": (hidden,), "w2": (hidden, dm), "b2": (dm,)}[tensor]
    raise KeyError(name)


def init_params(config: EncoderConfig = EncoderConfig(), seed: int = 0) -> DualEncoderParams:
    """Seeded from-scratch init: normal(0, 0.02) weights, identity layernorms."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config).items():
        leaf = name.split(".")[-1]
        if name == "tau":
            tensors[name] = np.array(math.log(INIT_LOGIT_SCALE), dtype=np.float32)
        elif leaf == "g":
            tensors[name] = np.ones(shape, dtype=np.float32)
        elif leaf.startswith("b") and leaf not in ("w1", "w2"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            tensors[name] = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
    return DualEncoderParams(config, tensors)


def new_grads(params: DualEncoderParams) -> dict[str, np.ndarray]:
    """Zeroed gradient buffers in the parameters' dtype (float64 in shadow mode)."""
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


# ---------------------------------------------------------------------------
# Primitive layers (forward caches feed the explicit backward passes)

_LN_EPS = 1e-5


def _linear_fwd(x, w, b):
    return x @ w + b, (x, w)


def _linear_bwd(dout, cache, dw, db):
    x, w = cache
    dw += x.reshape(-1, x.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])
    db += dout.reshape(-1, dout.shape[-1]).sum(axis=0)
    return dout @ w.T


def _layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return g * xhat + b, (xhat, inv, g)


def _layernorm_bwd(dout, cache, dg, db):
    xhat, inv, g = cache
    n = xhat.shape[-1]
    dg += (dout * xhat).reshape(-1, n).sum(axis=0)
    db += dout.reshape(-1, n).sum(axis=0)
    dxhat = dout * g
    return (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)) * inv


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def _gelu_fwd(x):
    u = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def _gelu_bwd(dout, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)
    return dout * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)


def _softmax_last(x):
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=-1, keepdims=True)


def _attention_fwd(x, p, prefix, heads, key_mask):
    b = prefix
    q, cq = _linear_fwd(x, p[f"{b}.wq"], p[f"{b}.bq"])
    k, ck = _linear_fwd(x, p[f"{b}.wk"], p[f"{b}.bk"])
    v, cv = _linear_fwd(x, p[f"{b}.wv"], p[f"{b}.bv"])
    B, L, D = q.shape
    hd = D // heads

    def split(t):
        return t.reshape(B, L, heads, hd).transpose(0, 2, 1, 3)

    qh, kh, vh = split(q), split(k), split(v)
    scale = 1.0 / math.sqrt(hd)
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    if key_mask is not None:
        scores = scores + (1.0 - key_mask[:, None, None, :]) * -1e9
    attn = _softmax_last(scores)
    zh = attn @ vh
    z = zh.transpose(0, 2, 1, 3).reshape(B, L, D)
    out, co = _linear_fwd(z, p[f"{b}.wo"], p[f"{b}.bo"])
    return out, (cq, ck, cv, co, qh, kh, vh, attn, scale, heads)


def _attention_bwd(dout, cache, p, prefix, grads):
    cq, ck, cv, co, qh, kh, vh, attn, scale, heads = cache
    b = prefix
    dz = _linear_bwd(dout, co, grads[f"{b}.wo"], grads[f"{b}.bo"])
    B, L, D = dz.shape
    hd = D // heads
    dzh = dz.reshape(B, L, heads, hd).transpose(0, 2, 1, 3)
    dattn = dzh @ vh.transpose(0, 1, 3, 2)
    dvh = attn.transpose(0, 1, 3, 2) @ dzh
    dscores = (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * attn
    dqh = (dscores @ kh) * scale
    dkh = (dscores.transpose(0, 1, 3, 2) @ qh) * scale

    def merge(t):
        return t.transpose(0, 2, 1, 3).reshape(B, L, D)

    dx = _linear_bwd(merge(dqh), cq, grads[f"{b}.wq"], grads[f"{b}.bq"])
    dx += _linear_bwd(merge(dkh), ck, grads[f"{b}.wk"], grads[f"{b}.bk"])
    dx += _linear_bwd(merge(dvh), cv, grads[f"{b}.wv"], grads[f"{b}.bv"])
    return dx


def _block_fwd(x, p, prefix, heads, key_mask):
    y, c_ln1 = _layernorm_fwd(x, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"])
    a, c_attn = _attention_fwd(y, p, f"{prefix}.attn", heads, key_mask)
    x1 = x + a
    y2, c_ln2 = _layernorm_fwd(x1, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"])
    h_pre, c_fc1 = _linear_fwd(y2, p[f"{prefix}.mlp.w1"], p[f"{prefix}.mlp.b1"])
    h, c_gelu = _gelu_fwd(h_pre)
    m, c_fc2 = _linear_fwd(h, p[f"{prefix}.mlp.w2"], p[f"{prefix}.mlp.b2"])
    return x1 + m, (c_ln1, c_attn, c_ln2, c_fc1, c_gelu, c_fc2)


def _block_bwd(dout, cache, p, prefix, grads):
    c_ln1, c_attn, c_ln2, c_fc1, c_gelu, c_fc2 = cache
    dh = _linear_bwd(dout, c_fc2, grads[f"{prefix}.mlp.w2"], grads[f"{prefix}.mlp.b2"])
    dh_pre = _gelu_bwd(dh, c_gelu)
    dy2 = _linear_bwd(dh_pre, c_fc1, grads[f"{prefix}.mlp.w1"], grads[f"{prefix}.mlp.b1"])
    dx1 = dout + _layernorm_bwd(dy2, c_ln2, grads[f"{prefix}.ln2.g"], grads[f"{prefix}.ln2.b"])
    da = dx1
    dy = _attention_bwd(da, c_attn, p, f"{prefix}.attn", grads)
    dx = dx1 + _layernorm_bwd(dy, c_ln1, grads[f"{prefix}.ln1.g"], grads[f"{prefix}.ln1.b"])
    return dx


def _l2norm_fwd(x):
    n = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    y = x / n
    return y, (y, n)


def _l2norm_bwd(dout, cache):
    y, n = cache
    return (dout - y * (dout * y).sum(axis=-1, keepdims=True)) / n


def _tower_fwd(params, prefix, x0, key_mask):
    p = params.tensors
    heads = params.config.heads
    x = x0
    block_caches = []
    for i in range(params.config.depth):
        x, c = _block_fwd(x, p, f"{prefix}.blocks.{i}", heads, key_mask)
        block_caches.append(c)
    y, c_post = _layernorm_fwd(x, p[f"{prefix}.ln_post.g"], p[f"{prefix}.ln_post.b"])
    if key_mask is None:
        pooled = y.mean(axis=1)
        counts = None
    else:
        counts = key_mask.sum(axis=1, keepdims=True)
        pooled = (y * key_mask[:, :, None]).sum(axis=1) / counts
    proj, c_proj = _linear_fwd(pooled, p[f"{prefix}.proj"], np.zeros(params.config.embed_dim, dtype=x.dtype))
    emb, c_norm = _l2norm_fwd(proj)
    return emb, (block_caches, c_post, key_mask, counts, y.shape[1], c_proj, c_norm)


def _tower_bwd(params, prefix, demb, cache, grads):
    p = params.tensors
    block_caches, c_post, key_mask, counts, seq_len, c_proj, c_norm = cache
    dproj = _l2norm_bwd(demb, c_norm)
    dbias = np.zeros(params.config.embed_dim, dtype=np.float64)
    dpooled = _linear_bwd(dproj, c_proj, grads[f"{prefix}.proj"], dbias)
    if key_mask is None:
        dy = np.repeat(dpooled[:, None, :], seq_len, axis=1) / seq_len
    else:
        dy = dpooled[:, None, :] * (key_mask[:, :, None] / counts[:, :, None])
    dx = _layernorm_bwd(dy, c_post, grads[f"{prefix}.ln_post.g"], grads[f"{prefix}.ln_post.b"])
    for i in range(params.config.depth - 1, -1, -1):
        dx = _block_bwd(dx, block_caches[i], p, f"{prefix}.blocks.{i}", grads)
    return dx


# ---------------------------------------------------------------------------
# Public encoding API


def pixels_to_float(pixels: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 RGB -> [-1, 1]."""
    return pixels.astype(dtype) / 127.5 - 1.0


def patchify(images: np.ndarray, config: EncoderConfig) -> np.ndarray:
    """(B, S, S, 3) float -> (B, n_patches, patch_dim), row-major patches."""
    b = images.shape[0]
    s, ps = config.image_size, config.patch_size
    side = s // ps
    x = images.reshape(b, side, ps, side, ps, 3)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, side * side, ps * ps * 3)


def _image_input(params: DualEncoderParams, patches: np.ndarray):
    p = params.tensors
    x0, c_patch = _linear_fwd(patches, p["img.patch.w"], p["img.patch.b"])
    x0 = x0 + p["img.pos"][None, :, :]
    return x0, c_patch


def encode_image_batch(params: DualEncoderParams, images: np.ndarray, with_cache: bool = False):
    """Encode (B, 224, 224, 3) uint8 or float images to unit-norm rows."""
    cfg = params.config
    if images.ndim != 4 or images.shape[1:] != (cfg.image_size, cfg.image_size, 3):
        raise BadDimensions(f"expected (B, {cfg.image_size}, {cfg.image_size}, 3), got {images.shape}")
    dtype = params.tensors["img.patch.w"].dtype
    floats = pixels_to_float(images, dtype) if images.dtype == np.uint8 else images.astype(dtype)
    patches = patchify(floats, cfg)
    x0, c_patch = _image_input(params, patches)
    emb, cache = _tower_fwd(params, "img", x0, None)
    if with_cache:
        return emb, (c_patch, cache)
    return emb


def image_backward(params: DualEncoderParams, demb: np.ndarray, cache, grads) -> None:
    c_patch, tower_cache = cache
    dx0 = _tower_bwd(params, "img", demb, tower_cache, grads)
    grads["img.pos"] += dx0.sum(axis=0)
    patches, _ = c_patch  # input gradient is not needed below the patch projection
    flat_in = patches.reshape(-1, patches.shape[-1])
    flat_out = dx0.reshape(-1, dx0.shape[-1])
    grads["img.patch.w"] += flat_in.T @ flat_out
    grads["img.patch.b"] += flat_out.sum(axis=0)


def encode_image(params: DualEncoderParams, bitmap) -> np.ndarray:
    """Single 224x224 bitmap (Bitmap or array) -> unit-norm embedding."""
    pixels = bitmap.pixels if hasattr(bitmap, "pixels") else np.asarray(bitmap)
    if pixels.ndim != 3 or pixels.shape != (params.config.image_size, params.config.image_size, 3):
        raise BadDimensions(f"expected {params.config.image_size}x{params.config.image_size} RGB, got {pixels.shape}")
    return encode_image_batch(params, pixels[None])[0]


def _text_input(params: DualEncoderParams, token_lists: Sequence[Sequence[int]]):
    cfg = params.config
    p = params.tensors
    b = len(token_lists)
    max_len = max(len(t) for t in token_lists)
    ids = np.zeros((b, max_len), dtype=np.int64)
    mask = np.zeros((b, max_len), dtype=p["txt.tok"].dtype)
    for i, toks in enumerate(token_lists):
        ids[i, : len(toks)] = toks
        mask[i, : len(toks)] = 1.0
    x0 = p["txt.tok"][ids] + p["txt.pos"][None, :max_len, :]
    return x0, ids, mask


def encode_text_batch(params: DualEncoderParams, token_lists: Sequence[Sequence[int]], with_cache: bool = False):
    cfg = params.config
    for toks in token_lists:
        if len(toks) > cfg.max_tokens:
            raise BadDimensions(f"token sequence longer than {cfg.max_tokens}")
        if len(toks) == 0:
            raise BadDimensions("empty token sequence")
    x0, ids, mask = _text_input(params, token_lists)
    emb, cache = _tower_fwd(params, "txt", x0, mask)
    if with_cache:
        return emb, (ids, mask, cache)
    return emb


def text_backward(params: DualEncoderParams, demb: np.ndarray, cache, grads) -> None:
    ids, mask, tower_cache = cache
    dx0 = _tower_bwd(params, "txt", demb, tower_cache, grads)
    dx0 = dx0 * mask[:, :, None]  # padding rows carry no signal
    np.add.at(grads["txt.tok"], ids, dx0)
    grads["txt.pos"][: dx0.shape[1]] += dx0.sum(axis=0)


def encode_text(params: DualEncoderParams, tokens: Sequence[int]) -> np.ndarray:
    return encode_text_batch(params, [list(tokens)])[0]


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(params: DualEncoderParams, path) -> None:
    cfg = params.config
    header = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "d_model": cfg.d_model,
        "d": cfg.embed_dim,
        "t": cfg.depth,
        "heads": cfg.heads,
        "vocab": cfg.vocab_size,
        "max_tokens": cfg.max_tokens,
        "patch": cfg.patch_size,
        "image_size": cfg.image_size,
        "tau": params.tau,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in params.tensors.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for tensor in params.tensors.values():
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_checkpoint(path) -> DualEncoderParams:
    with open(Path(path), "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("magic") != CHECKPOINT_MAGIC:
            raise ValueError(f"not a {CHECKPOINT_MAGIC} checkpoint: {path}")
        cfg = EncoderConfig(
            d_model=header["d_model"],
            depth=header["t"],
            heads=header["heads"],
            embed_dim=header["d"],
            vocab_size=header["vocab"],
            max_tokens=header.get("max_tokens", 77),
            patch_size=header.get("patch", 32),
            image_size=header.get("image_size", 224),
        )
        tensors: dict[str, np.ndarray] = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 4)
            arr = np.frombuffer(buf, dtype="<f4", count=count).reshape(shape)
            tensors[spec["name"]] = arr.astype(np.float32).copy() if shape else np.array(arr[()], dtype=np.float32)
    return DualEncoderParams(cfg, tensors)

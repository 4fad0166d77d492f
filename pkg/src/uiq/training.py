"""Contrastive objectives, AdamW, dataset views, and the staged schedule.

Both losses are implemented with explicit analytic gradients (verified
against central finite differences in the test suite). The batch objective
is the literal symmetric double sum of per-row and per-column cross
entropies; the pairwise objective is a two-way softmax preferring the
better screenshot against a "well-designed" description.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .encoder import (
    DualEncoderParams,
    MAX_LOGIT_SCALE,
    encode_image_batch,
    encode_text_batch,
    image_backward,
    new_grads,
    text_backward,
    tokenize,
)
from .forge import PreferencePair, UISample, build_description, sample_description

__all__ = [
    "ShapeMismatch",
    "EmptyDataset",
    "clip_loss",
    "clip_loss_grads",
    "pairwise_loss",
    "pairwise_loss_grads",
    "TrainConfig",
    "preset_config",
    "AdamW",
    "ContrastiveView",
    "PairwiseView",
    "DatasetViews",
    "load_resized",
    "random_crop",
    "train_stage",
    "run_schedule",
    "STAGE_OBJECTIVES",
]


class ShapeMismatch(Exception):
    pass


class EmptyDataset(Exception):
    pass


# ---------------------------------------------------------------------------
# Losses (forward in float64 accumulation; analytic gradients)


def _check_batch(v: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v64 = np.asarray(v, dtype=np.float64)
    w64 = np.asarray(w, dtype=np.float64)
    if v64.ndim != 2 or w64.ndim != 2 or v64.shape != w64.shape:
        raise ShapeMismatch(f"expected matching (N, D) embeddings, got {v64.shape} and {w64.shape}")
    return v64, w64


def _log_softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def clip_loss(v: np.ndarray, w: np.ndarray, tau: float = 0.0) -> float:
    """Symmetric batch contrastive loss over scaled logits exp(tau) * V W^T.

    tau=0 fixes the logit scale at 1, matching the raw-dot-product form.
    """
    return clip_loss_grads(v, w, tau)[0]


def clip_loss_grads(v: np.ndarray, w: np.ndarray, tau: float = 0.0):
    v64, w64 = _check_batch(v, w)
    scale = math.exp(tau)
    dots = v64 @ w64.T
    logits = scale * dots
    row_ls = _log_softmax(logits, axis=1)
    col_ls = _log_softmax(logits, axis=0)
    loss = float(-(np.trace(row_ls) + np.trace(col_ls)))
    eye = np.eye(len(v64))
    dlogits = (np.exp(row_ls) - eye) + (np.exp(col_ls) - eye)
    dv = scale * dlogits @ w64
    dw = scale * dlogits.T @ v64
    dtau = float((dlogits * logits).sum())
    return loss, dv, dw, dtau


def pairwise_loss(v_plus: np.ndarray, v_minus: np.ndarray, w_plus: np.ndarray, tau: float = 0.0) -> float:
    """Two-way softmax loss; batched inputs average over the batch."""
    return pairwise_loss_grads(v_plus, v_minus, w_plus, tau)[0]


def pairwise_loss_grads(v_plus: np.ndarray, v_minus: np.ndarray, w_plus: np.ndarray, tau: float = 0.0):
    vp = np.atleast_2d(np.asarray(v_plus, dtype=np.float64))
    vm = np.atleast_2d(np.asarray(v_minus, dtype=np.float64))
    wp = np.atleast_2d(np.asarray(w_plus, dtype=np.float64))
    if not (vp.shape == vm.shape == wp.shape):
        raise ShapeMismatch(f"embedding shapes differ: {vp.shape}, {vm.shape}, {wp.shape}")
    single = np.asarray(v_plus).ndim == 1
    scale = math.exp(tau)
    s_pos = scale * (vp * wp).sum(axis=1)
    s_neg = scale * (vm * wp).sum(axis=1)
    margin = s_pos - s_neg
    # -ln sigmoid(margin), stable in both tails
    losses = np.logaddexp(0.0, -margin)
    n = len(losses)
    loss = float(losses.mean())
    p = 1.0 / (1.0 + np.exp(-margin))
    d_pos = (p - 1.0) / n  # d loss / d s_pos
    d_neg = (1.0 - p) / n
    dvp = d_pos[:, None] * scale * wp
    dvm = d_neg[:, None] * scale * wp
    dwp = scale * (d_pos[:, None] * vp + d_neg[:, None] * vm)
    dtau = float((d_pos * s_pos + d_neg * s_neg).sum())
    if single:
        dvp, dvm, dwp = dvp[0], dvm[0], dwp[0]
    return loss, dvp, dvm, dwp, dtau


# ---------------------------------------------------------------------------
# Optimizer


class AdamW:
    """Adam with decoupled weight decay; decay applies to matrices only."""

    def __init__(self, params: DualEncoderParams, lr: float, betas: tuple[float, float],
                 eps: float, weight_decay: float):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros(v.shape, dtype=np.float64) for k, v in params.tensors.items()}
        self.v = {k: np.zeros(v.shape, dtype=np.float64) for k, v in params.tensors.items()}

    def step(self, params: DualEncoderParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, tensor in params.tensors.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and tensor.ndim >= 2:
                update = update + self.weight_decay * tensor.astype(np.float64)
            new = tensor.astype(np.float64) - self.lr * update
            params.tensors[name] = new.astype(tensor.dtype)
        tau = params.tensors["tau"]
        params.tensors["tau"] = np.minimum(tau, np.float32(math.log(MAX_LOGIT_SCALE)))


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "batch_contrastive"  # batch_contrastive | pairwise
    batch_size: int = 32
    epochs: int = 20
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-6
    seed: int = 0
    preset: str = "desk"


_PRESETS = {
    "desk": dict(batch_size=32, epochs=20, learning_rate=1e-3, weight_decay=0.01),
    "paper-stage1": dict(batch_size=128, epochs=1, learning_rate=5e-7, weight_decay=0.2),
    "paper-stage2+": dict(batch_size=256, epochs=1, learning_rate=5e-7, weight_decay=0.2),
}


def preset_config(name: str, objective: str = "batch_contrastive", seed: int = 0) -> TrainConfig:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    return TrainConfig(objective=objective, seed=seed, preset=name, **_PRESETS[name])


# ---------------------------------------------------------------------------
# Dataset views and preprocessing


def load_resized(path, image_size: int = 224, cache: Optional[dict] = None) -> np.ndarray:
    """Decode a PNG and scale so the smaller dimension equals image_size."""
    key = str(path)
    if cache is not None and key in cache:
        return cache[key]
    img = Image.open(path).convert("RGB")
    w, h = img.size
    scale = image_size / min(w, h)
    nw = max(image_size, int(round(w * scale)))
    nh = max(image_size, int(round(h * scale)))
    if min(nw, nh) != image_size:  # guard against rounding upward on the short side
        if w <= h:
            nw = image_size
        else:
            nh = image_size
    arr = np.asarray(img.resize((nw, nh), Image.BILINEAR), dtype=np.uint8)
    if cache is not None:
        cache[key] = arr
    return arr


def random_crop(resized: np.ndarray, rng: np.random.Generator, size: int = 224) -> np.ndarray:
    """Random square window along the long axis (the random-crop strategy)."""
    h, w = resized.shape[:2]
    y0 = int(rng.integers(0, h - size + 1)) if h > size else 0
    x0 = int(rng.integers(0, w - size + 1)) if w > size else 0
    return resized[y0 : y0 + size, x0 : x0 + size]


class ContrastiveView:
    """(screenshot, full description) pairs for the batch objective."""

    def __init__(self, samples: Sequence[UISample], root_dir, params_vocab: int = 8192,
                 max_tokens: int = 77, image_size: int = 224, cache_images: bool = True):
        self.items = [(str(Path(root_dir) / s.image), sample_description(s)) for s in samples]
        self.image_size = image_size
        self.vocab = params_vocab
        self.max_tokens = max_tokens
        self._cache: Optional[dict] = {} if cache_images else None

    def __len__(self) -> int:
        return len(self.items)

    def batch(self, indices: Sequence[int], rng: np.random.Generator):
        images = []
        tokens = []
        for i in indices:
            path, description = self.items[i]
            resized = load_resized(path, self.image_size, self._cache)
            images.append(random_crop(resized, rng, self.image_size))
            tokens.append(tokenize(description, self.vocab, self.max_tokens))
        return np.stack(images), tokens


class PairwiseView:
    """(preferred image, non-preferred image, well-designed text) triples.

    Tie pairs carry no strict preference and are excluded.
    """

    def __init__(self, pairs: Sequence[PreferencePair], samples_by_id: dict[str, UISample],
                 root_dir, params_vocab: int = 8192, max_tokens: int = 77,
                 image_size: int = 224, cache_images: bool = True):
        root = Path(root_dir)
        self.items = []
        for p in pairs:
            if p.preferred not in ("A", "B") or p.irrelevant:
                continue
            pos_id, neg_id = (p.a, p.b) if p.preferred == "A" else (p.b, p.a)
            pos, neg = samples_by_id[pos_id], samples_by_id[neg_id]
            text = build_description("well-designed", [], p.caption or pos.caption)
            self.items.append((str(root / pos.image), str(root / neg.image), text))
        self.image_size = image_size
        self.vocab = params_vocab
        self.max_tokens = max_tokens
        self._cache: Optional[dict] = {} if cache_images else None

    def __len__(self) -> int:
        return len(self.items)

    def batch(self, indices: Sequence[int], rng: np.random.Generator):
        pos_images, neg_images, tokens = [], [], []
        for i in indices:
            pos_path, neg_path, text = self.items[i]
            pos = load_resized(pos_path, self.image_size, self._cache)
            neg = load_resized(neg_path, self.image_size, self._cache)
            pos_images.append(random_crop(pos, rng, self.image_size))
            neg_images.append(random_crop(neg, rng, self.image_size))
            tokens.append(tokenize(text, self.vocab, self.max_tokens))
        return np.stack(pos_images), np.stack(neg_images), tokens


@dataclass
class DatasetViews:
    contrastive: ContrastiveView
    pairwise: PairwiseView


# ---------------------------------------------------------------------------
# Training


def _contrastive_step(params: DualEncoderParams, images, tokens):
    dtype = params.tensors["tau"].dtype
    emb_i, cache_i = encode_image_batch(params, images, with_cache=True)
    emb_t, cache_t = encode_text_batch(params, tokens, with_cache=True)
    loss, dv, dw, dtau = clip_loss_grads(emb_i, emb_t, params.tau)
    grads = new_grads(params)
    image_backward(params, dv.astype(dtype), cache_i, grads)
    text_backward(params, dw.astype(dtype), cache_t, grads)
    grads["tau"] += dtype.type(dtau)
    return loss, grads


def _pairwise_step(params: DualEncoderParams, pos_images, neg_images, tokens):
    dtype = params.tensors["tau"].dtype
    stacked = np.concatenate([pos_images, neg_images], axis=0)
    emb, cache_i = encode_image_batch(params, stacked, with_cache=True)
    n = len(pos_images)
    emb_t, cache_t = encode_text_batch(params, tokens, with_cache=True)
    loss, dvp, dvm, dwp, dtau = pairwise_loss_grads(emb[:n], emb[n:], emb_t, params.tau)
    grads = new_grads(params)
    image_backward(params, np.concatenate([dvp, dvm], axis=0).astype(dtype), cache_i, grads)
    text_backward(params, dwp.astype(dtype), cache_t, grads)
    grads["tau"] += dtype.type(dtau)
    return loss, grads


def train_stage(params: DualEncoderParams, view, config: TrainConfig) -> tuple[DualEncoderParams, list[float]]:
    """One training stage; returns updated parameters and the per-step losses."""
    n = len(view)
    if n == 0:
        raise EmptyDataset("dataset view is empty")
    params = params.copy()
    opt = AdamW(params, config.learning_rate, (config.beta1, config.beta2), config.eps, config.weight_decay)
    rng = np.random.default_rng(config.seed)
    batch_size = min(config.batch_size, n)
    trace: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            idx = order[start : start + batch_size]
            if config.objective == "batch_contrastive":
                images, tokens = view.batch(idx, rng)
                loss, grads = _contrastive_step(params, images, tokens)
            elif config.objective == "pairwise":
                pos, neg, tokens = view.batch(idx, rng)
                loss, grads = _pairwise_step(params, pos, neg, tokens)
            else:
                raise ValueError(f"unknown objective {config.objective!r}")
            opt.step(params, grads)
            trace.append(loss)
    return params, trace


STAGE_OBJECTIVES = {1: "batch_contrastive", 2: "pairwise", 3: "batch_contrastive", 4: "pairwise"}


def run_schedule(
    params: DualEncoderParams,
    synthetic: DatasetViews,
    human_rated: Optional[DatasetViews],
    configs: dict[int, TrainConfig],
    last_stage: int = 4,
) -> tuple[DualEncoderParams, dict[int, DualEncoderParams], dict[int, list[float]]]:
    """Staged schedule; each stage starts from the previous stage's weights.

    Stages: 1 synthetic batch-contrastive, 2 synthetic pairwise, 3 human
    batch-contrastive, 4 human pairwise. Any suffix may be disabled via
    `last_stage` to reproduce the ablation configurations. Returns the
    final weights plus a per-stage snapshot and loss-trace map.
    """
    if not 0 <= last_stage <= 4:
        raise ValueError("last_stage must be in 0..4")
    snapshots: dict[int, DualEncoderParams] = {}
    traces: dict[int, list[float]] = {}
    current = params
    for stage in range(1, last_stage + 1):
        views = synthetic if stage <= 2 else human_rated
        if views is None:
            raise EmptyDataset(f"stage {stage} requested but its dataset view is missing")
        view = views.contrastive if STAGE_OBJECTIVES[stage] == "batch_contrastive" else views.pairwise
        config = configs.get(stage)
        if config is None:
            raise ValueError(f"no config for stage {stage}")
        config = replace(config, objective=STAGE_OBJECTIVES[stage])
        current, trace = train_stage(current, view, config)
        snapshots[stage] = current
        traces[stage] = trace
    return current, snapshots, traces

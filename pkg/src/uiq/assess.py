"""Inference over arbitrary-size screenshots: windowed embedding, quality
scoring, defect suggestion, pair choice, candidate ranking, and retrieval."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .encoder import DualEncoderParams, encode_image_batch, encode_text, tokenize
from .forge import EmptyCaption, build_description
from .jitter import DEFECT_TAGS, TAG_CRAP
from .styledoc import round_half_up

__all__ = [
    "EmptyIndex",
    "WindowingPlan",
    "plan_windows",
    "embed_screenshot",
    "embed_text_description",
    "quality_score",
    "choose_better",
    "suggest_defects",
    "rank_candidates",
    "search",
    "SearchIndex",
    "build_index",
    "save_index",
    "load_index",
    "WINDOW",
]

WINDOW = 224


class EmptyIndex(Exception):
    pass


@dataclass(frozen=True)
class WindowingPlan:
    resized_width: int
    resized_height: int
    d: int  # long-axis length after resizing
    count: int
    offsets: tuple[int, ...]


def plan_windows(width: int, height: int, window: int = WINDOW) -> WindowingPlan:
    """Resize so the short side equals `window`; slide count = floor(d/w) + 1.

    The exactly-square case yields the single window at offset 0 (the
    formula's two coincident offsets collapse).
    """
    if width < 1 or height < 1:
        raise ValueError("dimensions must be positive")
    scale = window / min(width, height)
    if width <= height:
        rw, rh = window, max(window, round_half_up(height * scale))
    else:
        rh, rw = window, max(window, round_half_up(width * scale))
    d = max(rw, rh)
    if d == window:
        return WindowingPlan(rw, rh, d, 1, (0,))
    count = d // window + 1
    offsets = tuple(round_half_up(i * (d - window) / (count - 1)) for i in range(count))
    return WindowingPlan(rw, rh, d, count, offsets)


def _as_pixels(bitmap) -> np.ndarray:
    return bitmap.pixels if hasattr(bitmap, "pixels") else np.asarray(bitmap)


def _windows(bitmap, plan: WindowingPlan) -> np.ndarray:
    pixels = _as_pixels(bitmap)
    img = Image.fromarray(pixels, mode="RGB").resize((plan.resized_width, plan.resized_height), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.uint8)
    views = []
    for off in plan.offsets:
        if plan.resized_height >= plan.resized_width:
            views.append(arr[off : off + WINDOW, :WINDOW])
        else:
            views.append(arr[:WINDOW, off : off + WINDOW])
    return np.stack(views)


def embed_screenshot(params: DualEncoderParams, bitmap) -> np.ndarray:
    """Mean of the window embeddings, renormalized to the unit sphere."""
    pixels = _as_pixels(bitmap)
    plan = plan_windows(pixels.shape[1], pixels.shape[0])
    embs = encode_image_batch(params, _windows(pixels, plan))
    mean = embs.mean(axis=0)
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else mean


def embed_text_description(params: DualEncoderParams, text: str) -> np.ndarray:
    cfg = params.config
    return encode_text(params, tokenize(text, cfg.vocab_size, cfg.max_tokens))


def quality_score(params: DualEncoderParams, bitmap, caption: str) -> float:
    """Scaled dot product against the "well-designed" description."""
    if not caption:
        raise EmptyCaption("caption must be non-empty")
    img = embed_screenshot(params, bitmap)
    txt = embed_text_description(params, build_description("well-designed", [], caption))
    return float(np.dot(img, txt) * math.exp(params.tau))


def choose_better(params: DualEncoderParams, bitmap_a, bitmap_b, caption: str) -> str:
    """Argmax of the quality score; exact ties go to A."""
    return "A" if quality_score(params, bitmap_a, caption) >= quality_score(params, bitmap_b, caption) else "B"


def suggest_defects(
    params: DualEncoderParams,
    bitmap,
    caption: str,
    candidates: Optional[Sequence[str]] = None,
    crap_only: bool = False,
) -> list[tuple[str, float]]:
    """Defect tags scoring strictly above the untagged-description threshold.

    With crap_only, surfaced tags project onto the four design principles'
    tags (merged by max score).
    """
    if not caption:
        raise EmptyCaption("caption must be non-empty")
    tags = list(DEFECT_TAGS if candidates is None else candidates)
    unknown = set(tags) - set(DEFECT_TAGS)
    if unknown:
        raise ValueError(f"unknown defect tags: {sorted(unknown)}")
    img = embed_screenshot(params, bitmap)
    scale = math.exp(params.tau)
    threshold = float(np.dot(img, embed_text_description(params, build_description("poor design", [], caption))) * scale)
    surfaced = []
    for tag in tags:
        text = build_description("poor design", [tag], caption)
        score = float(np.dot(img, embed_text_description(params, text)) * scale)
        if score > threshold:
            surfaced.append((tag, score))
    surfaced.sort(key=lambda item: -item[1])
    if crap_only:
        merged: dict[str, float] = {}
        for tag, score in surfaced:
            for principle in TAG_CRAP[tag]:
                crap_tag = f"bad {principle}"
                if crap_tag not in merged or score > merged[crap_tag]:
                    merged[crap_tag] = score
        surfaced = sorted(merged.items(), key=lambda item: -item[1])
    return surfaced


def rank_candidates(params: DualEncoderParams, bitmaps: Sequence, caption: str) -> list[int]:
    """Indices in descending score order; equal scores keep input order."""
    if not bitmaps:
        raise ValueError("need at least one candidate")
    scores = [quality_score(params, b, caption) for b in bitmaps]
    return sorted(range(len(bitmaps)), key=lambda i: -scores[i])


@dataclass
class SearchIndex:
    ids: list[str]
    images: list[str]
    vectors: np.ndarray  # (N, D) float32, unit rows


def build_index(params: DualEncoderParams, entries: Sequence[tuple[str, str]], root_dir=".") -> SearchIndex:
    """Embed every (id, image_path) entry with the windowed encoder."""
    from .raster import load_png

    ids, images, vecs = [], [], []
    for sample_id, image in entries:
        bitmap = load_png(Path(root_dir) / image)
        vecs.append(embed_screenshot(params, bitmap))
        ids.append(sample_id)
        images.append(image)
    if not ids:
        raise EmptyIndex("no entries to index")
    return SearchIndex(ids, images, np.stack(vecs).astype(np.float32))


def save_index(index: SearchIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(json.dumps({"count": len(index.ids), "dim": int(index.vectors.shape[1])}).encode() + b"\n")
        for sample_id, image in zip(index.ids, index.images):
            fh.write(json.dumps({"id": sample_id, "image": image}).encode() + b"\n")
        fh.write(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())


def load_index(path) -> SearchIndex:
    with open(path, "rb") as fh:
        meta = json.loads(fh.readline())
        ids, images = [], []
        for _ in range(meta["count"]):
            rec = json.loads(fh.readline())
            ids.append(rec["id"])
            images.append(rec["image"])
        data = fh.read(meta["count"] * meta["dim"] * 4)
        vectors = np.frombuffer(data, dtype="<f4").reshape(meta["count"], meta["dim"]).copy()
    return SearchIndex(ids, images, vectors)


def search(
    params: DualEncoderParams,
    index: SearchIndex,
    query: str,
    k: int = 10,
    negative: Optional[str] = None,
    lam: float = 0.5,
) -> list[tuple[str, float]]:
    """Top-k ids by dot product with the (optionally biased) query embedding."""
    if index is None or len(index.ids) == 0:
        raise EmptyIndex("no index loaded")
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    q = embed_text_description(params, build_description("well-designed", [], query))
    if negative:
        q = q - lam * embed_text_description(params, negative)
        norm = np.linalg.norm(q)
        if norm > 0:
            q = q / norm
    scores = index.vectors @ q.astype(np.float32)
    order = sorted(range(len(index.ids)), key=lambda i: (-float(scores[i]), index.ids[i]))
    return [(index.ids[i], float(scores[i])) for i in order[:k]]

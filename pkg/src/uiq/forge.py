"""Dataset forging: samples, preference pairs, descriptions, splits, agreement.

Two dataset styles come out of here: a synthetic one (originals plus
degraded variants of local pages, preference always favoring the
original) and a human-rated one (pairwise ratings over clustered
screenshots). Both serialize to JSON-Lines manifests consumed by
training and evaluation.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import cluster as _cluster
from .corpus import CorpusEntry, read_corpus
from .jitter import (
    AllJittersNoOp,
    CRAP_PRINCIPLES,
    apply_plan,
    mix_seed,
    sample_jitter_plan,
)
from .raster import render_document, save_png
from .styledoc import default_caption, parse_document

log = logging.getLogger(__name__)

__all__ = [
    "EmptyCaption",
    "ValidationError",
    "InsufficientRaters",
    "UISample",
    "PreferencePair",
    "RatingSubmission",
    "build_description",
    "sample_description",
    "synthesize_corpus",
    "cluster_by_caption",
    "ingest_rating",
    "split_keys",
    "assign_splits",
    "krippendorff_alpha",
    "read_samples",
    "write_samples",
    "read_pairs",
    "write_pairs",
    "SPLITS",
    "SYNTH_RATIOS",
    "HUMAN_RATIOS",
]


class EmptyCaption(Exception):
    pass


class ValidationError(Exception):
    pass


class InsufficientRaters(Exception):
    pass


SPLITS = ("train", "val", "test")
SYNTH_RATIOS = (0.8, 0.1, 0.1)
HUMAN_RATIOS = (0.7, 0.1, 0.2)

QUALITY_TAGS = ("well-designed", "poor design", "none")


@dataclass(frozen=True)
class UISample:
    id: str
    image: str
    caption: str
    quality: str  # well-designed | poor design | none
    defects: tuple[str, ...] = ()
    source: str = "synthetic"  # synthetic | real | generated
    device: str = "mobile"
    origin_id: str = ""
    key: str = ""
    split: str = "unassigned"

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "image": self.image,
            "caption": self.caption,
            "quality": self.quality,
            "defects": list(self.defects),
            "source": self.source,
            "device": self.device,
            "origin_id": self.origin_id,
            "key": self.key,
            "split": self.split,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "UISample":
        return cls(
            id=rec["id"],
            image=rec["image"],
            caption=rec["caption"],
            quality=rec["quality"],
            defects=tuple(rec.get("defects", ())),
            source=rec.get("source", "synthetic"),
            device=rec.get("device", "mobile"),
            origin_id=rec.get("origin_id", rec["id"]),
            key=rec.get("key", ""),
            split=rec.get("split", "unassigned"),
        )


@dataclass(frozen=True)
class PreferencePair:
    pair_id: str
    a: str
    b: str
    preferred: str  # A | B | same
    principles: tuple[str, ...] = ()
    caption: str = ""
    rater_id: Optional[str] = None
    cluster_id: Optional[int | str] = None
    split: str = "unassigned"
    irrelevant: bool = False  # un-captionable pair; excluded from training
    note: str = ""  # rater's free-text remark; stored, never trained on

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "a": self.a,
            "b": self.b,
            "preferred": self.preferred,
            "principles": list(self.principles),
            "caption": self.caption,
            "rater_id": self.rater_id,
            "cluster_id": self.cluster_id,
            "split": self.split,
            "irrelevant": self.irrelevant,
            "note": self.note,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PreferencePair":
        return cls(
            pair_id=rec["pair_id"],
            a=rec["a"],
            b=rec["b"],
            preferred=rec["preferred"],
            principles=tuple(rec.get("principles", ())),
            caption=rec.get("caption", ""),
            rater_id=rec.get("rater_id"),
            cluster_id=rec.get("cluster_id"),
            split=rec.get("split", "unassigned"),
            irrelevant=rec.get("irrelevant", False),
            note=rec.get("note", ""),
        )


# ---------------------------------------------------------------------------
# Descriptions


def build_description(quality: str, defects: Sequence[str], caption: str) -> str:
    """Canonical text: prefix, optional quality tag, defect clauses, caption."""
    if not caption:
        raise EmptyCaption("caption must be non-empty")
    if quality not in QUALITY_TAGS:
        raise ValueError(f"unknown quality tag {quality!r}")
    parts = ["ui screenshot."]
    if quality != "none":
        parts.append(f"{quality}.")
    for defect in defects:
        parts.append(f"{defect}.")
    parts.append(caption)
    return " ".join(parts)


def sample_description(sample: UISample) -> str:
    return build_description(sample.quality, sample.defects, sample.caption)


# ---------------------------------------------------------------------------
# Synthetic forging

_MAX_PLAN_ATTEMPTS = 16


def synthesize_corpus(
    corpus: str | Path | list[CorpusEntry],
    variants_per_page: int,
    seed: int,
    out_dir: str | Path,
    external_renderer: Optional[str] = None,
) -> tuple[list[UISample], list[PreferencePair]]:
    """One original + `variants_per_page` degraded variants per page.

    Writes images under out_dir/images and samples/pairs manifests in
    out_dir. Per-page failures are logged and skipped; raises only if no
    page succeeds.
    """
    if variants_per_page < 1:
        raise ValueError("variants_per_page must be >= 1")
    entries = read_corpus(corpus) if not isinstance(corpus, list) else corpus
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    samples: list[UISample] = []
    pairs: list[PreferencePair] = []
    for idx, entry in enumerate(entries):
        try:
            html = Path(entry.path).read_text(encoding="utf-8")
            doc = parse_document(html, entry.device, source_url=entry.url)
            caption = entry.caption or default_caption(doc)
            if not caption:
                raise EmptyCaption(f"no caption source for {entry.path}")
            page_id = f"p{idx:05d}"
            original = UISample(
                id=page_id,
                image=f"images/{page_id}.png",
                caption=caption,
                quality="well-designed",
                defects=(),
                source="synthetic",
                device=entry.device,
                origin_id=page_id,
                key=entry.url,
            )
            save_png(render_document(doc, external_renderer), out_dir / original.image)

            page_samples = [original]
            page_pairs = []
            for v in range(variants_per_page):
                jittered = None
                tags: list[str] = []
                for attempt in range(_MAX_PLAN_ATTEMPTS):
                    plan = sample_jitter_plan(mix_seed(seed, idx, v, attempt))
                    try:
                        jittered, tags = apply_plan(doc, plan)
                        break
                    except AllJittersNoOp:
                        continue
                if jittered is None:
                    raise AllJittersNoOp(f"page {entry.path} variant {v}")
                variant_id = f"{page_id}v{v}"
                variant = UISample(
                    id=variant_id,
                    image=f"images/{variant_id}.png",
                    caption=caption,
                    quality="poor design",
                    defects=tuple(tags),
                    source="synthetic",
                    device=entry.device,
                    origin_id=page_id,
                    key=entry.url,
                )
                save_png(render_document(jittered, external_renderer), out_dir / variant.image)
                page_samples.append(variant)
                page_pairs.append(
                    PreferencePair(
                        pair_id=f"{page_id}-{v}",
                        a=page_id,
                        b=variant_id,
                        preferred="A",
                        caption=caption,
                    )
                )
        except Exception as exc:  # per-page isolation
            log.warning("skipping page %s: %s", entry.path, exc)
            continue
        samples.extend(page_samples)
        pairs.extend(page_pairs)

    if not samples:
        raise RuntimeError("no page in the corpus could be forged")
    write_samples(samples, out_dir / "samples.jsonl")
    write_pairs(pairs, out_dir / "pairs.jsonl")
    return samples, pairs


# ---------------------------------------------------------------------------
# Clustering


def cluster_by_caption(
    samples: Sequence[UISample], epsilon: float = 0.1, min_samples: int = 5
) -> dict[str, int]:
    """DBSCAN (cosine) over caption embeddings; -1 is noise.

    Samples of different sources are clustered in separate runs so a
    cluster never mixes real-world and synthetic origins; cluster ids are
    globally unique across runs.
    """
    assignment: dict[str, int] = {}
    offset = 0
    for source in ("real", "generated", "synthetic"):
        group = [s for s in samples if s.source == source]
        if not group:
            continue
        mat = np.stack([_cluster.embed_caption(s.caption) for s in group])
        labels = _cluster.dbscan_cosine(mat, epsilon, min_samples)
        for s, label in zip(group, labels):
            assignment[s.id] = -1 if label == -1 else label + offset
        if labels:
            offset += max(labels) + 1 if max(labels) >= 0 else 0
    return assignment


# ---------------------------------------------------------------------------
# Rating ingestion


@dataclass(frozen=True)
class RatingSubmission:
    caption: str
    choice: str  # A | B | same
    principles: tuple[str, ...] = ()
    rater_id: Optional[str] = None
    irrelevant: bool = False


def ingest_rating(
    pair_id: str,
    a: UISample,
    b: UISample,
    submission: RatingSubmission,
    cluster_id: Optional[int] = None,
) -> tuple[PreferencePair, UISample, UISample]:
    """Turn a rater submission into a stored pair plus re-described samples."""
    if submission.choice not in ("A", "B", "same"):
        raise ValidationError(f"choice must be A, B or same, got {submission.choice!r}")
    principles = tuple(p for p in CRAP_PRINCIPLES if p in submission.principles)
    if set(submission.principles) - set(CRAP_PRINCIPLES):
        raise ValidationError("principles must be a subset of contrast/repetition/alignment/proximity")
    if submission.choice == "same" and principles:
        raise ValidationError("principles must be empty when both are about the same")
    if not submission.caption:
        raise ValidationError("caption must be non-empty")

    caption = submission.caption
    defect_tags = tuple(f"bad {p}" for p in principles)
    if submission.choice == "same":
        new_a = replace(a, caption=caption, quality="none", defects=())
        new_b = replace(b, caption=caption, quality="none", defects=())
    elif submission.choice == "A":
        new_a = replace(a, caption=caption, quality="well-designed", defects=())
        new_b = replace(b, caption=caption, quality="poor design", defects=defect_tags)
    else:
        new_a = replace(a, caption=caption, quality="poor design", defects=defect_tags)
        new_b = replace(b, caption=caption, quality="well-designed", defects=())

    pair = PreferencePair(
        pair_id=pair_id,
        a=a.id,
        b=b.id,
        preferred=submission.choice,
        principles=principles,
        caption=caption,
        rater_id=submission.rater_id,
        cluster_id=cluster_id,
    )
    return pair, new_a, new_b


# ---------------------------------------------------------------------------
# Splits


def split_keys(keys: Iterable[str], ratios: Sequence[float], seed: int) -> dict[str, str]:
    """Deterministic key -> split assignment honoring exact ratio boundaries."""
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ValueError("ratios must be three values summing to 1")
    distinct = sorted(set(keys))
    random.Random(seed).shuffle(distinct)
    n = len(distinct)
    bounds = [round(sum(ratios[: i + 1]) * n) for i in range(3)]
    out = {}
    start = 0
    for split, end in zip(SPLITS, bounds):
        for key in distinct[start:end]:
            out[key] = split
        start = end
    return out


def assign_splits(
    samples: Sequence[UISample],
    pairs: Sequence[PreferencePair],
    ratios: Sequence[float],
    seed: int,
) -> tuple[list[UISample], list[PreferencePair]]:
    """Split by the samples' grouping key; pair members stay co-located."""
    table = split_keys((s.key for s in samples), ratios, seed)
    new_samples = [replace(s, split=table[s.key]) for s in samples]
    by_id = {s.id: s for s in new_samples}
    new_pairs = []
    for p in pairs:
        sa, sb = by_id[p.a], by_id[p.b]
        if sa.split != sb.split:
            raise ValidationError(f"pair {p.pair_id} straddles splits; keys differ")
        new_pairs.append(replace(p, split=sa.split))
    return new_samples, new_pairs


# ---------------------------------------------------------------------------
# Inter-rater reliability


def krippendorff_alpha(ratings: dict[str, dict[str, str]]) -> float:
    """Nominal-level alpha over the jointly rated items.

    `ratings` maps rater -> item -> category. Items rated fewer than twice
    contribute nothing; at least two raters and one multiply-rated item
    are required.
    """
    if len(ratings) < 2:
        raise InsufficientRaters("need at least two raters")
    by_item: dict[str, list[str]] = {}
    for rater_ratings in ratings.values():
        for item, value in rater_ratings.items():
            by_item.setdefault(item, []).append(value)
    units = {item: vals for item, vals in by_item.items() if len(vals) >= 2}
    if not units:
        raise InsufficientRaters("no item was rated by two or more raters")

    categories = sorted({v for vals in units.values() for v in vals})
    index = {c: i for i, c in enumerate(categories)}
    k = len(categories)
    coincidence = [[0.0] * k for _ in range(k)]
    for vals in units.values():
        m = len(vals)
        for i, vi in enumerate(vals):
            for j, vj in enumerate(vals):
                if i != j:
                    coincidence[index[vi]][index[vj]] += 1.0 / (m - 1)

    totals = [sum(row) for row in coincidence]
    n = sum(totals)
    observed = sum(coincidence[c][d] for c in range(k) for d in range(k) if c != d)
    expected = sum(totals[c] * totals[d] for c in range(k) for d in range(k) if c != d)
    if expected == 0:
        return 1.0
    do = observed / n
    de = expected / (n * (n - 1))
    return 1.0 - do / de


# ---------------------------------------------------------------------------
# Manifest I/O (JSON Lines)


def write_samples(samples: Iterable[UISample], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(s.to_record(), ensure_ascii=False) for s in samples]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_samples(path) -> list[UISample]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(UISample.from_record(json.loads(line)))
    return out


def write_pairs(pairs: Iterable[PreferencePair], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(p.to_record(), ensure_ascii=False) for p in pairs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_pairs(path) -> list[PreferencePair]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(PreferencePair.from_record(json.loads(line)))
    return out

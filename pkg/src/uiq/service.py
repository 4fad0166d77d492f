"""HTTP studio service: the rating-collection loop plus scoring and search.

Endpoints (all normative): GET /api/pairs/next, POST /api/ratings,
POST /api/score (multipart), GET /api/search, GET /api/export, and static
image serving under /static/. Ratings are an append-only, fsync-on-ack
store so an acknowledged rating survives a process restart.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import random
import threading
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Form, HTTPException, Query, Response, UploadFile
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from . import assess
from .encoder import DualEncoderParams, load_checkpoint
from .forge import (
    PreferencePair,
    RatingSubmission,
    UISample,
    ValidationError,
    ingest_rating,
    read_samples,
)
from .raster import Bitmap

__all__ = ["StudioStore", "create_app", "CALIBRATION_SIZE"]

CALIBRATION_SIZE = 10
_VALID_SPLITS = ("train", "val", "test", "unassigned")


class RatingBody(BaseModel):
    # module scope: postponed annotations resolve against module globals
    pair_id: str
    rater: str
    caption: str = ""
    choice: Optional[str] = None
    principles: list[str] = []
    irrelevant: bool = False
    note: str = ""


def _pair_id(a: str, b: str) -> str:
    return "h" + hashlib.sha1(f"{a}|{b}".encode()).hexdigest()[:12]


class Conflict(Exception):
    pass


class StudioStore:
    """Samples, the in-cluster pair universe, and the append-only rating log."""

    def __init__(self, data_dir, calibration_path=None, seed: int = 0):
        self.data_dir = Path(data_dir)
        self.ratings_path = self.data_dir / "ratings.jsonl"
        self.rated_samples_path = self.data_dir / "rated_samples.jsonl"
        self.lock = threading.Lock()
        self.rng = random.Random(seed)

        samples_path = self.data_dir / "samples.jsonl"
        self.samples: dict[str, UISample] = {}
        if samples_path.exists():
            for s in read_samples(samples_path):
                self.samples[s.id] = s

        clusters: dict[str, list[str]] = {}
        for s in self.samples.values():
            clusters.setdefault(s.key, []).append(s.id)
        self.pairs_by_cluster: dict[str, list[str]] = {}
        self.pair_info: dict[str, tuple[str, str, str]] = {}
        for key in sorted(clusters):
            members = sorted(clusters[key])
            if len(members) < 2:
                continue
            ids = []
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    pid = _pair_id(members[i], members[j])
                    self.pair_info[pid] = (members[i], members[j], key)
                    ids.append(pid)
            self.pairs_by_cluster[key] = ids

        self.calibration: list[str] = self._load_calibration(calibration_path, seed)

        self.ratings: list[dict] = []
        self.rated_by: dict[str, set[str]] = {}
        if self.ratings_path.exists():
            for line in self.ratings_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self.ratings.append(rec)
                    self.rated_by.setdefault(rec.get("rater_id") or "", set()).add(rec["pair_id"])
        self.rated_samples: list[dict] = []
        if self.rated_samples_path.exists():
            for line in self.rated_samples_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self.rated_samples.append(json.loads(line))

    def _load_calibration(self, calibration_path, seed: int) -> list[str]:
        if calibration_path:
            ids = []
            for line in Path(calibration_path).read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                a, b = sorted((rec["a"], rec["b"]))
                pid = _pair_id(a, b)
                if pid not in self.pair_info:
                    key = self.samples[a].key if a in self.samples else ""
                    self.pair_info[pid] = (a, b, key)
                    self.pairs_by_cluster.setdefault(key, []).append(pid)
                ids.append(pid)
            return ids
        universe = sorted(self.pair_info)
        random.Random(seed).shuffle(universe)
        return universe[:CALIBRATION_SIZE]

    # -- pair serving ------------------------------------------------------

    def next_pair(self, rater: str) -> Optional[dict]:
        with self.lock:
            rated = self.rated_by.get(rater, set())
            pid = None
            for candidate in self.calibration:
                if candidate not in rated:
                    pid = candidate
                    break
            if pid is None:
                open_clusters = sorted(
                    key for key, pids in self.pairs_by_cluster.items() if any(p not in rated for p in pids)
                )
                if not open_clusters:
                    return None
                key = self.rng.choice(open_clusters)
                remaining = sorted(p for p in self.pairs_by_cluster[key] if p not in rated)
                pid = self.rng.choice(remaining)
            a, b, key = self.pair_info[pid]
            sample_a = self.samples.get(a)
            return {
                "pair_id": pid,
                "image_a": f"/static/{self.samples[a].image}" if a in self.samples else "",
                "image_b": f"/static/{self.samples[b].image}" if b in self.samples else "",
                "draft_caption": sample_a.caption if sample_a else "",
                "cluster_id": key,
            }

    # -- rating ingestion ----------------------------------------------------

    def _append(self, path: Path, records: list[dict]) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def submit(self, rater: str, pair_id: str, caption: str, choice: Optional[str],
               principles: list[str], irrelevant: bool, note: str = "") -> dict:
        with self.lock:
            if pair_id not in self.pair_info:
                raise ValidationError(f"unknown pair {pair_id}")
            if pair_id in self.rated_by.get(rater, set()):
                raise Conflict(f"{rater} already rated {pair_id}")
            a_id, b_id, key = self.pair_info[pair_id]
            sample_a = self.samples.get(a_id)
            sample_b = self.samples.get(b_id)
            if irrelevant:
                pair = PreferencePair(
                    pair_id=pair_id, a=a_id, b=b_id, preferred="same", principles=(),
                    caption=caption, rater_id=rater, cluster_id=key, irrelevant=True, note=note,
                )
                new_samples = []
                if sample_a is not None and caption:
                    new_samples.append(replace(sample_a, caption=caption, quality="none", defects=()))
            else:
                if sample_a is None or sample_b is None:
                    raise ValidationError("pair references unknown samples")
                submission = RatingSubmission(
                    caption=caption, choice=choice or "", principles=tuple(principles), rater_id=rater
                )
                pair, new_a, new_b = ingest_rating(pair_id, sample_a, sample_b, submission, cluster_id=key)
                pair = replace(pair, rater_id=rater, note=note)
                new_samples = [new_a, new_b]

            pair_rec = pair.to_record()
            sample_recs = [s.to_record() for s in new_samples]
            self._append(self.ratings_path, [pair_rec])
            if sample_recs:
                self._append(self.rated_samples_path, sample_recs)
            self.ratings.append(pair_rec)
            self.rated_samples.extend(sample_recs)
            self.rated_by.setdefault(rater, set()).add(pair_id)
            return pair_rec

    # -- export ------------------------------------------------------------

    def export_lines(self, split: Optional[str]) -> list[str]:
        with self.lock:
            sample_recs = [s.to_record() for s in self.samples.values()] + list(self.rated_samples)
            pair_recs = list(self.ratings)
        lines = []
        for rec in sample_recs:
            if split is None or rec.get("split", "unassigned") == split:
                lines.append(json.dumps(rec, ensure_ascii=False))
        for rec in pair_recs:
            if split is None or rec.get("split", "unassigned") == split:
                lines.append(json.dumps(rec, ensure_ascii=False))
        return lines


def create_app(
    data_dir,
    model: Optional[DualEncoderParams | str] = None,
    index: Optional[assess.SearchIndex | str] = None,
    calibration=None,
    seed: int = 0,
) -> FastAPI:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    store = StudioStore(data_dir, calibration_path=calibration, seed=seed)
    params = load_checkpoint(model) if isinstance(model, (str, Path)) else model
    search_index = assess.load_index(index) if isinstance(index, (str, Path)) else index

    app = FastAPI(title="uiq studio")
    app.state.store = store
    app.state.params = params
    app.state.index = search_index

    @app.get("/api/pairs/next")
    def pairs_next(response: Response, rater: str = Query(default="")):
        if not rater:
            raise HTTPException(status_code=400, detail="rater id is required")
        payload = store.next_pair(rater)
        if payload is None:
            raise HTTPException(status_code=404, detail="no unrated pairs remain")
        response.set_cookie("rater", rater)
        return payload

    @app.post("/api/ratings")
    def post_rating(body: RatingBody):
        if not body.rater:
            raise HTTPException(status_code=400, detail="rater id is required")
        if not body.irrelevant and not body.caption:
            raise HTTPException(status_code=422, detail="caption is required")
        try:
            return store.submit(body.rater, body.pair_id, body.caption, body.choice,
                                body.principles, body.irrelevant, body.note)
        except Conflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/api/score")
    def post_score(image: UploadFile, caption: str = Form(default=""), crap_only: bool = True):
        if params is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        if not caption.strip():
            raise HTTPException(status_code=422, detail="caption is required")
        raw = image.file.read()
        try:
            pil = Image.open(io.BytesIO(raw)).convert("RGB")
        except Exception:
            raise HTTPException(status_code=400, detail="image could not be decoded")
        pixels = np.asarray(pil, dtype=np.uint8)
        bitmap = Bitmap(width=pil.width, height=pil.height, pixels=pixels)
        score = assess.quality_score(params, bitmap, caption)
        suggestions = assess.suggest_defects(params, bitmap, caption, crap_only=crap_only)
        return {"score": score, "suggestions": [{"tag": t, "score": s} for t, s in suggestions]}

    @app.get("/api/search")
    def get_search(
        q: str = Query(default=""),
        k: int = Query(default=10, ge=1),
        negative: Optional[str] = None,
        lam: float = Query(default=0.5, alias="lambda", ge=0.0),
    ):
        if search_index is None or params is None:
            raise HTTPException(status_code=503, detail="no index loaded")
        if not q.strip():
            raise HTTPException(status_code=422, detail="query is required")
        results = assess.search(params, search_index, q, k=k, negative=negative, lam=lam)
        image_of = dict(zip(search_index.ids, search_index.images))
        return [
            {"id": sample_id, "image_url": f"/static/{image_of[sample_id]}", "score": score}
            for sample_id, score in results
        ]

    @app.get("/api/export")
    def get_export(split: Optional[str] = None):
        if split is not None and split not in _VALID_SPLITS:
            raise HTTPException(status_code=404, detail=f"unknown split {split!r}")
        lines = store.export_lines(split)
        body = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(body, media_type="application/x-ndjson")

    app.mount("/static", StaticFiles(directory=str(data_dir)), name="static")
    return app

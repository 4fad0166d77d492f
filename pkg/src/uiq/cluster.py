"""Caption clustering: hashed lexical embeddings + DBSCAN over cosine distance."""

from __future__ import annotations

import hashlib
import re
from collections import deque

import numpy as np

__all__ = ["embed_caption", "dbscan_cosine", "EMBED_DIM"]

EMBED_DIM = 512


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.md5(token.encode()).digest()[:8], "little")


def embed_caption(caption: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Term-frequency vector over lowercased word unigrams, hashed, L2-normalized."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in re.findall(r"[a-z0-9]+", caption.lower()):
        vec[_stable_hash(token) % dim] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def dbscan_cosine(vectors: np.ndarray, epsilon: float, min_samples: int) -> list[int]:
    """Classic DBSCAN with distance 1 - cosine similarity; -1 marks noise.

    Neighborhoods include the point itself. Deterministic: points are
    visited in input order, so labels are reproducible.
    """
    n = len(vectors)
    if n == 0:
        return []
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vectors / safe[:, None]
    sim = unit @ unit.T
    dist = 1.0 - sim
    neighborhoods = [np.flatnonzero(dist[i] <= epsilon) for i in range(n)]
    core = [len(nb) >= min_samples for nb in neighborhoods]

    labels = [-1] * n
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque(neighborhoods[i])
        while queue:
            j = int(queue.popleft())
            if labels[j] == -1:
                labels[j] = cluster
                if core[j]:
                    queue.extend(neighborhoods[j])
        cluster += 1
    return labels

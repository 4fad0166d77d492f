"""Seeded document degradations ("jitters") and their defect vocabulary.

Nine deterministic transforms inject known visual defects into a styled
document: palette swaps, numeric noise on colors/sizes/spacing, contrast
reduction, content removal, and flow flips. Up to three compose per plan.
Every mutation lands as an inline declaration so serialization keeps it.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .styledoc import StyledDocument, iter_nodes, round_half_up, with_inline

__all__ = [
    "NoEligibleNodes",
    "AllJittersNoOp",
    "JITTER_KINDS",
    "JITTER_TAGS",
    "CRAP_PRINCIPLES",
    "CRAP_TAGS",
    "DEFECT_TAGS",
    "TAG_CRAP",
    "TARGETED_PROPS",
    "JitterPlan",
    "sample_jitter_plan",
    "plan_to_record",
    "plan_from_record",
    "apply_jitter",
    "apply_plan",
    "resolved_diff",
]


class NoEligibleNodes(Exception):
    """The jitter could not change anything; caller should resample."""


class AllJittersNoOp(Exception):
    """Every application in the plan was a no-op."""


JITTER_KINDS = (
    "color_swap",
    "color_noise",
    "font_size_swap",
    "text_size_noise",
    "text_contrast",
    "background_contrast",
    "spacing_noise",
    "complexity_reduce",
    "layout_modify",
)

JITTER_TAGS = {
    "color_swap": "bad color choice",
    "color_noise": "bad color noise",
    "font_size_swap": "bad font sizing",
    "text_size_noise": "bad text sizing",
    "text_contrast": "bad text contrast",
    "background_contrast": "bad background contrast",
    "spacing_noise": "bad spacing",
    "complexity_reduce": "cluttered content",
    "layout_modify": "bad layout",
}

CRAP_PRINCIPLES = ("contrast", "repetition", "alignment", "proximity")

CRAP_TAGS = tuple(f"bad {p}" for p in CRAP_PRINCIPLES)

DEFECT_TAGS = tuple(JITTER_TAGS[k] for k in JITTER_KINDS) + CRAP_TAGS

# Which design principles each defect violates.
TAG_CRAP = {
    "bad color choice": frozenset({"contrast", "repetition"}),
    "bad color noise": frozenset({"contrast", "repetition"}),
    "bad font sizing": frozenset({"contrast", "repetition"}),
    "bad text sizing": frozenset({"contrast", "repetition"}),
    "bad text contrast": frozenset({"contrast"}),
    "bad background contrast": frozenset({"contrast"}),
    "bad spacing": frozenset({"alignment", "proximity"}),
    "cluttered content": frozenset(CRAP_PRINCIPLES),
    "bad layout": frozenset({"alignment", "proximity"}),
    "bad contrast": frozenset({"contrast"}),
    "bad repetition": frozenset({"repetition"}),
    "bad alignment": frozenset({"alignment"}),
    "bad proximity": frozenset({"proximity"}),
}

_SPACING_PROPS = tuple(f"{p}_{s}" for p in ("margin", "padding") for s in ("top", "right", "bottom", "left"))

# Property sets a successful jitter is allowed to touch.
TARGETED_PROPS = {
    "color_swap": frozenset({"color", "background_color"}),
    "color_noise": frozenset({"color", "background_color"}),
    "font_size_swap": frozenset({"font_size"}),
    "text_size_noise": frozenset({"font_size"}),
    "text_contrast": frozenset({"color"}),
    "background_contrast": frozenset({"background_color"}),
    "spacing_noise": frozenset(_SPACING_PROPS),
    "complexity_reduce": frozenset({"visible"}),  # plus anything on the hidden nodes themselves
    "layout_modify": frozenset({"flow"}),
}

FONT_MIN, FONT_MAX = 6, 96
COLOR_NOISE_SPAN = 96.0
SPACING_NOISE_SPAN = 24.0


@dataclass(frozen=True)
class JitterPlan:
    seed: int
    applications: tuple[tuple[str, float], ...]  # (kind, magnitude), 1..3, kinds distinct


def mix_seed(*parts: int) -> int:
    """Stable 64-bit sub-seed derivation (platform independent)."""
    data = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "little")


def sample_jitter_plan(seed: int) -> JitterPlan:
    """Uniformly sample 1-3 distinct jitter kinds with magnitudes in [0.3, 1]."""
    rng = random.Random(seed)
    count = rng.randint(1, 3)
    kinds = rng.sample(JITTER_KINDS, count)
    apps = tuple((kind, rng.uniform(0.3, 1.0)) for kind in kinds)
    return JitterPlan(seed=seed, applications=apps)


def plan_to_record(plan: JitterPlan) -> dict:
    """Manifest form: snake_case kind names, decimal magnitudes."""
    return {
        "seed": plan.seed,
        "applications": [{"kind": k, "magnitude": m} for k, m in plan.applications],
    }


def plan_from_record(record: dict) -> JitterPlan:
    apps = tuple((a["kind"], float(a["magnitude"])) for a in record["applications"])
    for kind, magnitude in apps:
        if kind not in JITTER_KINDS:
            raise ValueError(f"unknown jitter kind {kind!r}")
        if not 0 < magnitude <= 1:
            raise ValueError(f"magnitude out of range: {magnitude}")
    return JitterPlan(seed=int(record["seed"]), applications=apps)


def _sattolo(items: list, rng: random.Random) -> dict:
    """Seeded cyclic permutation: maps every item to a different one."""
    order = list(items)
    for i in range(len(order) - 1, 0, -1):
        j = rng.randrange(i)
        order[i], order[j] = order[j], order[i]
    return dict(zip(items, order))


def _blend(a: tuple, b: tuple, m: float) -> tuple:
    return tuple(round_half_up(ca + m * (cb - ca)) for ca, cb in zip(a, b))


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


def _jitter_updates(doc: StyledDocument, kind: str, magnitude: float, rng: random.Random):
    nodes = list(iter_nodes(doc.root))
    updates: dict = {}
    strip: set = set()

    if kind == "color_swap":
        palette: list = []
        for _, node in nodes:
            for prop in ("color", "background_color"):
                c = node.resolved[prop]
                if c not in palette:
                    palette.append(c)
        if len(palette) < 2:
            raise NoEligibleNodes("fewer than two distinct colors")
        perm = _sattolo(palette, rng)
        for path, node in nodes:
            updates[path] = {
                "color": perm[node.resolved["color"]],
                "background_color": perm[node.resolved["background_color"]],
            }

    elif kind == "color_noise":
        span = magnitude * COLOR_NOISE_SPAN
        for path, node in nodes:
            upd = {}
            for prop in ("color", "background_color"):
                c = node.resolved[prop]
                upd[prop] = tuple(_clamp(round_half_up(ch + rng.uniform(-span, span)), 0, 255) for ch in c)
            updates[path] = upd

    elif kind == "font_size_swap":
        text_nodes = [(p, n) for p, n in nodes if n.text_content]
        sizes: list = []
        for _, node in text_nodes:
            s = node.resolved["font_size"]
            if s not in sizes:
                sizes.append(s)
        if len(sizes) < 2:
            raise NoEligibleNodes("fewer than two distinct font sizes")
        perm = _sattolo(sizes, rng)
        for path, node in text_nodes:
            updates[path] = {"font_size": perm[node.resolved["font_size"]]}

    elif kind == "text_size_noise":
        text_nodes = [(p, n) for p, n in nodes if n.text_content]
        if not text_nodes:
            raise NoEligibleNodes("no text nodes")
        lo, hi = 1 - 0.6 * magnitude, 1 + 1.4 * magnitude
        for path, node in text_nodes:
            factor = rng.uniform(lo, hi)
            size = _clamp(round_half_up(node.resolved["font_size"] * factor), FONT_MIN, FONT_MAX)
            updates[path] = {"font_size": size}

    elif kind == "text_contrast":
        for path, node in nodes:
            if node.text_content and node.resolved["color"] != node.resolved["background_color"]:
                updates[path] = {"color": _blend(node.resolved["color"], node.resolved["background_color"], magnitude)}
        if not updates:
            raise NoEligibleNodes("no contrasting text")

    elif kind == "background_contrast":
        for path, node in nodes:
            if node.text_content and node.resolved["color"] != node.resolved["background_color"]:
                updates[path] = {
                    "background_color": _blend(node.resolved["background_color"], node.resolved["color"], magnitude)
                }
        if not updates:
            raise NoEligibleNodes("no contrasting text")

    elif kind == "spacing_noise":
        span = magnitude * SPACING_NOISE_SPAN
        for path, node in nodes:
            upd = {}
            for prop in _SPACING_PROPS:
                delta = rng.uniform(-span, span)
                upd[prop] = max(0, round_half_up(node.resolved[prop] + delta))
            updates[path] = upd

    elif kind == "complexity_reduce":
        leaves = [p for p, n in nodes if not n.children and p != ()]
        if not leaves:
            raise NoEligibleNodes("no removable leaves")
        k = min(len(leaves), max(1, round_half_up(magnitude * len(leaves))))
        for path in rng.sample(leaves, k):
            updates[path] = {"visible": False}
            strip.add(path)

    elif kind == "layout_modify":
        containers = [p for p, n in nodes if n.children]
        if not containers:
            raise NoEligibleNodes("no container nodes")
        k = min(len(containers), max(1, round_half_up(magnitude * len(containers))))
        for path in rng.sample(containers, k):
            node = dict(nodes)[path]
            updates[path] = {"flow": "row" if node.resolved["flow"] == "block" else "block"}

    else:
        raise ValueError(f"unknown jitter kind {kind!r}")

    return updates, strip


def apply_jitter(doc: StyledDocument, kind: str, magnitude: float, seed: int) -> StyledDocument:
    """Apply one jitter; raises NoEligibleNodes if nothing would change."""
    if not 0 < magnitude <= 1:
        raise ValueError("magnitude must be in (0, 1]")
    rng = random.Random(seed)
    updates, strip = _jitter_updates(doc, kind, magnitude, rng)
    jittered = with_inline(doc, updates, strip)
    if not resolved_diff(doc, jittered):
        raise NoEligibleNodes("jitter rounded to a no-op")
    return jittered


def apply_plan(doc: StyledDocument, plan: JitterPlan) -> tuple[StyledDocument, list[str]]:
    """Apply the plan's jitters in order; returns the new doc and defect tags."""
    tags: list[str] = []
    current = doc
    for i, (kind, magnitude) in enumerate(plan.applications):
        try:
            current = apply_jitter(current, kind, magnitude, mix_seed(plan.seed, i))
        except NoEligibleNodes:
            continue
        tags.append(JITTER_TAGS[kind])
    if not tags:
        raise AllJittersNoOp(f"plan {plan.seed} changed nothing")
    return current, tags


def resolved_diff(a: StyledDocument, b: StyledDocument) -> list[tuple[tuple[int, ...], str, object, object]]:
    """Per-node, per-property differences in resolved styles (same shape trees)."""
    out = []
    b_nodes = dict(iter_nodes(b.root))
    for path, node in iter_nodes(a.root):
        other = b_nodes[path]
        for prop, value in node.resolved.items():
            if other.resolved[prop] != value:
                out.append((path, prop, value, other.resolved[prop]))
    return out

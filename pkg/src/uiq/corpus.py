"""Local page corpus: manifest ingestion and a procedural page generator.

A corpus is a directory of .html files plus an optional `corpus.jsonl`
manifest (fields: path, url, caption, device). The generator fabricates
deterministic, styled multi-section pages so the whole pipeline can run
self-contained at any scale.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

__all__ = ["CorpusEntry", "read_corpus", "generate_corpus"]

MANIFEST_NAME = "corpus.jsonl"


@dataclass(frozen=True)
class CorpusEntry:
    path: Path
    url: str
    caption: Optional[str]
    device: str


def read_corpus(corpus_dir) -> list[CorpusEntry]:
    """Entries from corpus.jsonl when present, else every .html in the dir."""
    corpus_dir = Path(corpus_dir)
    manifest = corpus_dir / MANIFEST_NAME
    entries: list[CorpusEntry] = []
    if manifest.exists():
        for line in manifest.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            entries.append(
                CorpusEntry(
                    path=corpus_dir / rec["path"],
                    url=rec.get("url") or rec["path"],
                    caption=rec.get("caption"),
                    device=rec.get("device", "mobile"),
                )
            )
    else:
        for path in sorted(corpus_dir.glob("*.html")):
            entries.append(CorpusEntry(path=path, url=path.name, caption=None, device="mobile"))
    return entries


# ---------------------------------------------------------------------------
# Procedural page generation

PAGE_KINDS = [
    "login screen",
    "signup form",
    "checkout page",
    "settings page",
    "profile page",
    "dashboard overview",
    "pricing page",
    "search results page",
    "contact form",
    "photo gallery",
    "music player",
    "news feed",
    "product detail page",
    "order history page",
    "notification center",
    "help center page",
    "weather forecast screen",
    "calendar view",
    "chat conversation screen",
    "file manager view",
]

_SYLLABLES = ["ba", "co", "di", "fu", "go", "ka", "lu", "mi", "no", "pe", "ra", "su", "ti", "vo", "ze", "qu"]

WORDS = (
    "account settings profile order total items cart payment shipping address "
    "email password username welcome back continue submit cancel search filter "
    "results recent popular trending featured details summary description price "
    "quantity checkout confirm review rating support help contact about terms "
    "privacy policy update save delete edit share download upload sync status "
    "notifications messages inbox archive friends followers posts comments likes"
).split()

PALETTES = [
    # (page bg, text, panel bg, panel text, accent bg, accent text)
    ("#ffffff", "#222222", "#f2f2f2", "#333333", "#2a6fb8", "#ffffff"),
    ("#fafaf5", "#1c2833", "#e8eef4", "#2e4053", "#c0392b", "#ffffff"),
    ("#f4f6f7", "#17202a", "#ffffff", "#212f3c", "#1e8449", "#ffffff"),
    ("#1b2631", "#ecf0f1", "#283747", "#d5dbdb", "#f39c12", "#1b2631"),
    ("#fdfefe", "#283747", "#fef9e7", "#6e2c00", "#7d3c98", "#ffffff"),
    ("#f8f9f9", "#424949", "#eaeded", "#1b4f72", "#148f77", "#ffffff"),
]


def parse_hex(color: str) -> tuple[int, int, int]:
    h = color.lstrip("#")
    return tuple(int(h[i : i + 2], 16) for i in (0, 2, 4))


def _brand_name(index: int) -> str:
    parts = []
    value = index
    for _ in range(3):
        parts.append(_SYLLABLES[value % len(_SYLLABLES)])
        value //= len(_SYLLABLES)
    return "".join(parts)


def _sentence(rng: random.Random, lo: int = 4, hi: int = 12) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def _pills(rng: random.Random, count: int, lo: int = 1, hi: int = 2) -> str:
    return "".join(f'<span class="accent">{_sentence(rng, lo, hi)}</span>' for _ in range(count))


# Structural archetypes. Pages of one kind share a template and palette
# family, so captions carry a learnable visual signal (the way real login
# screens resemble each other) while brand words vary per page.


def _tmpl_form(rng, k):
    rows = 3 + k % 3
    fields = "".join(
        f'<div class="row"><span class="accent">{rng.choice(WORDS)}</span><span>{_sentence(rng, 2, 4)}</span></div>'
        for _ in range(rows)
    )
    return f'<div class="panel">{fields}<div class="row">{_pills(rng, 1)}</div></div><p>{_sentence(rng, 3, 6)}</p>'


def _tmpl_cards(rng, k):
    cards = "".join(
        f'<div class="panel"><h2>{_sentence(rng, 2, 3)}</h2><p>{_sentence(rng, 5, 9)}</p></div>'
        for _ in range(2 + k % 3)
    )
    return f'<div class="nav">{_pills(rng, 3 + k % 3)}</div>{cards}'


def _tmpl_list(rng, k):
    rows = "".join(
        f'<div class="row"><span class="accent">{rng.choice(WORDS)}</span><span>{_sentence(rng, 3, 6)}</span></div>'
        for _ in range(5 + k % 4)
    )
    return f'<div class="panel">{rows}</div>'


def _tmpl_feed(rng, k):
    blocks = "".join(
        f'<p>{_sentence(rng, 8, 14)}</p><div class="panel"><p>{_sentence(rng, 4, 8)}</p></div>'
        for _ in range(2 + k % 2)
    )
    return blocks


def _tmpl_grid(rng, k):
    rows = "".join(f'<div class="row">{_pills(rng, 4 + k % 2)}</div>' for _ in range(3 + k % 3))
    return rows


def _tmpl_media(rng, k):
    return (
        f'<div class="panel"><h2>{_sentence(rng, 2, 4)}</h2><p>{_sentence(rng, 6, 10)}</p></div>'
        f'<div class="row">{_pills(rng, 3)}</div>'
    )


def _tmpl_chat(rng, k):
    bubbles = []
    for i in range(4 + k % 3):
        side = "margin:4px 40px 4px 4px" if i % 2 == 0 else "margin:4px 4px 4px 40px"
        bubbles.append(f'<div class="panel" style="{side}"><p>{_sentence(rng, 3, 7)}</p></div>')
    return "".join(bubbles)


_TEMPLATES = [_tmpl_form, _tmpl_cards, _tmpl_list, _tmpl_feed, _tmpl_grid, _tmpl_media, _tmpl_chat]


def _page_html(index: int, rng: random.Random) -> tuple[str, str]:
    kind_idx = index % len(PAGE_KINDS)
    kind = PAGE_KINDS[kind_idx]
    brand = _brand_name(index)
    caption = f"{kind} for {brand}"
    bg, fg, panel_bg, panel_fg, accent_bg, accent_fg = PALETTES[kind_idx % len(PALETTES)]
    h1 = 22 + 2 * (kind_idx % 5)
    h2 = 17 + (kind_idx % 4)
    body_size = 13 + (kind_idx % 3)
    pad = 6 + 2 * (kind_idx % 4)
    gap = 4 + 2 * (kind_idx % 3)

    css = [
        f"body{{background-color:{bg};color:{fg};font-size:{body_size}px;padding:{pad}px}}",
        f"h1{{font-size:{h1}px;margin:{gap}px 0px}}",
        f"h2{{font-size:{h2}px;margin:{gap}px 0px}}",
        f"p{{margin:{gap}px 0px}}",
        f".panel{{background-color:{panel_bg};color:{panel_fg};padding:{pad}px;margin:{gap}px 0px}}",
        f".accent{{background-color:{accent_bg};color:{accent_fg};padding:{max(2, pad // 2)}px;margin:{max(2, gap // 2)}px}}",
        f".nav{{display:row;background-color:{panel_bg};padding:{max(2, pad // 2)}px}}",
        f".row{{display:row;margin:{gap}px 0px}}",
    ]

    # a slice of originals ships with mediocre styling of its own, the way
    # real crawled pages do; absolute "looks degraded" cues then stop being
    # reliable and relative comparison carries the signal
    quirk = rng.random()
    if quirk < 0.06:
        mid = tuple((2 * a + 3 * b) // 5 for a, b in zip(parse_hex(bg), parse_hex(fg)))
        fg = "#%02x%02x%02x" % mid
        css[0] = f"body{{background-color:{bg};color:{fg};font-size:{body_size}px;padding:{pad}px}}"
    elif quirk < 0.12:
        css.append(f"h1{{font-size:{min(96, h1 * 2)}px;margin:{gap}px 0px}}")

    template = _TEMPLATES[kind_idx % len(_TEMPLATES)]
    parts = [f"<h1>{brand} {kind}</h1>", template(rng, kind_idx)]
    parts.append(f'<div class="panel"><p>{_sentence(rng, 3, 8)}</p></div>')

    html = (
        "<html><head>"
        f"<title>{caption}</title>"
        f"<style>{''.join(css)}</style>"
        "</head><body>" + "".join(parts) + "</body></html>"
    )
    return html, caption


def generate_corpus(out_dir, pages: int, seed: int, device: str = "mobile") -> list[CorpusEntry]:
    """Write `pages` deterministic HTML fixtures plus their manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    lines = []
    for i in range(pages):
        rng = random.Random(f"{seed}:{i}:page")  # str seeding is stable across runs
        html, caption = _page_html(i, rng)
        name = f"page{i:05d}.html"
        (out_dir / name).write_text(html, encoding="utf-8")
        url = f"https://example.test/{_brand_name(i)}/{i:05d}"
        lines.append(json.dumps({"path": name, "url": url, "caption": caption, "device": device}))
        entries.append(CorpusEntry(path=out_dir / name, url=url, caption=caption, device=device))
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return entries

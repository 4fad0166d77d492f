"""Block layout and bitmap rendering for styled documents.

A deliberately crude renderer: block children stack vertically, row-flow
children flow horizontally with wrap, and text paints as solid glyph
blocks. Crude, but faithfully sensitive to every property the jitters
mutate (contrast, size, spacing, flow, visibility). External screenshots
(PNG) can stand in for rendered documents anywhere a Bitmap is accepted.
"""

from __future__ import annotations

import math
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .styledoc import StyledDocument, StyledNode, round_half_up, serialize

__all__ = [
    "LayoutBox",
    "Bitmap",
    "layout",
    "rasterize",
    "render_document",
    "save_png",
    "load_png",
    "MIN_PAGE_HEIGHT",
]

MIN_PAGE_HEIGHT = 224

LINE_HEIGHT_FACTOR = 1.2
CHAR_WIDTH_FACTOR = 0.6
GLYPH_HEIGHT_FACTOR = 0.8


@dataclass
class TextLine:
    x: float
    y: float
    width: float
    height: int
    text: str
    font_size: int


@dataclass
class LayoutBox:
    node: StyledNode
    x: float
    y: float
    width: float
    height: float = 0.0
    children: list["LayoutBox"] = field(default_factory=list)
    text_lines: list[TextLine] = field(default_factory=list)


@dataclass
class Bitmap:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8


def _intrinsic_width(node: StyledNode) -> float:
    """Preferred unwrapped width used to size children in row flow."""
    s = node.resolved
    own = 0.0
    if node.text_content:
        own = CHAR_WIDTH_FACTOR * s["font_size"] * len(node.text_content)
    kids = [c for c in node.children if c.resolved["visible"]]
    if kids:
        widths = [
            _intrinsic_width(c) + c.resolved["margin_left"] + c.resolved["margin_right"]
            for c in kids
        ]
        own = max(own, sum(widths) if s["flow"] == "row" else max(widths))
    return own + s["padding_left"] + s["padding_right"]


def _layout_text(node: StyledNode, content_x: float, y: float, content_w: float) -> list[TextLine]:
    text = node.text_content or ""
    font = node.resolved["font_size"]
    char_w = CHAR_WIDTH_FACTOR * font
    line_h = round_half_up(LINE_HEIGHT_FACTOR * font)
    chars_per_line = max(1, int(content_w // char_w)) if content_w > 0 else 1
    lines = []
    for i in range(0, len(text), chars_per_line):
        chunk = text[i : i + chars_per_line]
        width = min(content_w, char_w * len(chunk))
        lines.append(TextLine(content_x, y + len(lines) * line_h, width, line_h, chunk, font))
    return lines


def _layout_node(node: StyledNode, x: float, y: float, width: float) -> LayoutBox:
    s = node.resolved
    box = LayoutBox(node, x, y, max(0.0, width))
    content_x = x + s["padding_left"]
    content_y = y + s["padding_top"]
    content_w = max(0.0, width - s["padding_left"] - s["padding_right"])
    cursor_y = content_y

    if node.text_content:
        box.text_lines = _layout_text(node, content_x, cursor_y, content_w)
        if box.text_lines:
            last = box.text_lines[-1]
            cursor_y = last.y + last.height

    kids = [c for c in node.children if c.resolved["visible"]]
    if s["flow"] == "row" and kids:
        cursor_x = content_x
        row_y = cursor_y
        row_h = 0.0
        for child in kids:
            cs = child.resolved
            ml, mr = cs["margin_left"], cs["margin_right"]
            mt, mb = cs["margin_top"], cs["margin_bottom"]
            w = min(max(0.0, content_w - ml - mr), _intrinsic_width(child))
            if cursor_x > content_x and cursor_x + ml + w > content_x + content_w:
                row_y += row_h
                row_h = 0.0
                cursor_x = content_x
            child_box = _layout_node(child, cursor_x + ml, row_y + mt, w)
            box.children.append(child_box)
            cursor_x += ml + child_box.width + mr
            row_h = max(row_h, mt + child_box.height + mb)
        cursor_y = row_y + row_h
    else:
        for child in kids:
            cs = child.resolved
            ml, mr = cs["margin_left"], cs["margin_right"]
            mt, mb = cs["margin_top"], cs["margin_bottom"]
            w = max(0.0, content_w - ml - mr)
            child_box = _layout_node(child, content_x + ml, cursor_y + mt, w)
            box.children.append(child_box)
            cursor_y = child_box.y + child_box.height + mb

    box.height = (cursor_y - content_y) + s["padding_top"] + s["padding_bottom"]
    return box


def layout(doc: StyledDocument) -> LayoutBox:
    """Compute the box tree; hidden nodes occupy no space."""
    s = doc.root.resolved
    width = max(0.0, doc.viewport_width_px - s["margin_left"] - s["margin_right"])
    return _layout_node(doc.root, s["margin_left"], s["margin_top"], width)


def _fill(px: np.ndarray, x0: float, y0: float, x1: float, y1: float, color: tuple) -> None:
    h, w = px.shape[:2]
    xa, ya = max(0, round_half_up(x0)), max(0, round_half_up(y0))
    xb, yb = min(w, round_half_up(x1)), min(h, round_half_up(y1))
    if xa < xb and ya < yb:
        px[ya:yb, xa:xb] = color


def _paint(box: LayoutBox, px: np.ndarray) -> None:
    s = box.node.resolved
    _fill(px, box.x, box.y, box.x + box.width, box.y + box.height, s["background_color"])
    color = s["color"]
    for line in box.text_lines:
        char_w = CHAR_WIDTH_FACTOR * line.font_size
        glyph_h = round_half_up(GLYPH_HEIGHT_FACTOR * line.font_size)
        y0 = line.y + (line.height - glyph_h) / 2
        for j, ch in enumerate(line.text):
            if ch.isspace():
                continue
            x0 = line.x + j * char_w
            if x0 + char_w > line.x + line.width + 0.5:
                break
            _fill(px, x0, y0, x0 + char_w, y0 + glyph_h, color)
    for child in box.children:
        _paint(child, px)


def rasterize(box: LayoutBox, doc: StyledDocument) -> Bitmap:
    """Paint the box tree depth-first onto an RGB bitmap."""
    s = doc.root.resolved
    content_bottom = box.y + box.height + s["margin_bottom"]
    height = max(MIN_PAGE_HEIGHT, int(math.ceil(content_bottom)))
    width = doc.viewport_width_px
    px = np.full((height, width, 3), 255, dtype=np.uint8)
    _paint(box, px)
    return Bitmap(width=width, height=height, pixels=px)


def save_png(bitmap: Bitmap, path) -> None:
    Image.fromarray(bitmap.pixels, mode="RGB").save(path, format="PNG")


def load_png(path) -> Bitmap:
    img = Image.open(path).convert("RGB")
    px = np.asarray(img, dtype=np.uint8)
    return Bitmap(width=img.width, height=img.height, pixels=px)


def render_document(doc: StyledDocument, external_cmd: str | None = None) -> Bitmap:
    """Render via the external hook when configured, else the builtin engine.

    The hook is invoked as `<cmd> <html_path> <out_png> <viewport_width>`;
    any failure falls back to the builtin rasterizer.
    """
    if external_cmd:
        with tempfile.TemporaryDirectory() as tmp:
            html_path = Path(tmp) / "page.html"
            out_path = Path(tmp) / "page.png"
            html_path.write_text(serialize(doc), encoding="utf-8")
            try:
                proc = subprocess.run(
                    [external_cmd, str(html_path), str(out_path), str(doc.viewport_width_px)],
                    capture_output=True,
                    timeout=60,
                )
                if proc.returncode == 0 and out_path.exists():
                    return load_png(out_path)
            except (OSError, subprocess.SubprocessError):
                pass
    return rasterize(layout(doc), doc)

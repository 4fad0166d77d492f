"""Styled HTML documents: parsing, style resolution, serialization.

The supported surface is deliberately small: element tree, tag/.class/#id
selectors, and the handful of CSS properties the degradation transforms
operate on (colors, font size, margins/padding, flow, visibility). Parsing
is tolerant: unknown tags become generic blocks, unknown declarations are
dropped, unclosed tags close at their parent boundary.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from html import escape
from typing import Iterator, Optional

__all__ = [
    "MalformedInput",
    "StyledNode",
    "StyledDocument",
    "Rule",
    "DEVICE_WIDTHS",
    "PROPERTIES",
    "DEFAULTS",
    "INHERITED",
    "ORIGINS",
    "parse_document",
    "resolve_styles",
    "serialize",
    "iter_nodes",
    "node_at",
    "with_inline",
    "default_caption",
    "round_half_up",
]


class MalformedInput(Exception):
    """No body-equivalent content could be recovered from the input."""


DEVICE_WIDTHS = {"mobile": 390, "tablet": 768, "desktop": 1280}

ORIGINS = ("tag", "class", "id", "inline")

SIDES = ("top", "right", "bottom", "left")

PROPERTIES = (
    "color",
    "background_color",
    "font_size",
    "margin_top",
    "margin_right",
    "margin_bottom",
    "margin_left",
    "padding_top",
    "padding_right",
    "padding_bottom",
    "padding_left",
    "flow",
    "visible",
)

DEFAULTS = {
    "color": (0, 0, 0),
    "background_color": (255, 255, 255),
    "font_size": 16,
    "margin_top": 0,
    "margin_right": 0,
    "margin_bottom": 0,
    "margin_left": 0,
    "padding_top": 0,
    "padding_right": 0,
    "padding_bottom": 0,
    "padding_left": 0,
    "flow": "block",
    "visible": True,
}

# Only color and font size cascade down; box properties do not.
INHERITED = ("color", "font_size")

VOID_TAGS = {"br", "hr", "img", "input", "meta", "link", "area", "base", "col", "wbr", "source"}

NAMED_COLORS = {
    "black": (0, 0, 0),
    "white": (255, 255, 255),
    "red": (255, 0, 0),
    "green": (0, 128, 0),
    "lime": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "gray": (128, 128, 128),
    "grey": (128, 128, 128),
    "silver": (192, 192, 192),
    "orange": (255, 165, 0),
    "purple": (128, 0, 128),
    "navy": (0, 0, 128),
    "teal": (0, 128, 128),
    "maroon": (128, 0, 0),
    "olive": (128, 128, 0),
}


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class StyledNode:
    tag: str
    id: Optional[str] = None
    classes: tuple[str, ...] = ()
    text_content: Optional[str] = None
    children: tuple["StyledNode", ...] = ()
    declared: dict = field(default_factory=dict)  # origin -> {prop: value}
    resolved: dict = field(default_factory=dict)  # prop -> value, total after resolve


@dataclass(frozen=True)
class Rule:
    kind: str  # "tag" | "class" | "id"
    key: str
    decls: dict


@dataclass(frozen=True)
class StyledDocument:
    root: StyledNode
    device: str = "mobile"
    viewport_width_px: int = 390
    source_url: Optional[str] = None
    stylesheet: tuple[Rule, ...] = ()
    title: Optional[str] = None


# ---------------------------------------------------------------------------
# Value parsing


def parse_color(text: str):
    t = text.strip().lower()
    if t in NAMED_COLORS:
        return NAMED_COLORS[t]
    if t.startswith("#"):
        h = t[1:]
        if len(h) == 3 and all(c in "0123456789abcdef" for c in h):
            return tuple(int(c * 2, 16) for c in h)
        if len(h) == 6 and all(c in "0123456789abcdef" for c in h):
            return tuple(int(h[i : i + 2], 16) for i in (0, 2, 4))
        return None
    m = re.fullmatch(r"rgb\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)", t)
    if m:
        rgb = tuple(int(g) for g in m.groups())
        if all(0 <= c <= 255 for c in rgb):
            return rgb
    return None


def _parse_px(text: str):
    m = re.fullmatch(r"(-?\d+(?:\.\d+)?)(?:px)?", text.strip().lower())
    if m is None:
        return None
    return round_half_up(float(m.group(1)))


def parse_declarations(css_text: str) -> dict:
    """Parse `prop: value; ...` into supported properties; unknown ones drop."""
    decls: dict = {}
    for chunk in css_text.split(";"):
        if ":" not in chunk:
            continue
        prop, _, value = chunk.partition(":")
        prop = prop.strip().lower()
        value = value.strip()
        if not value:
            continue
        if prop in ("color", "background-color"):
            rgb = parse_color(value)
            if rgb is not None:
                decls["color" if prop == "color" else "background_color"] = rgb
        elif prop == "font-size":
            px = _parse_px(value)
            if px is not None and px > 0:
                decls["font_size"] = px
        elif prop in ("margin", "padding"):
            parts = [_parse_px(p) for p in value.split()]
            if any(p is None for p in parts):
                continue
            if len(parts) == 1:
                t = r = b = l = parts[0]
            elif len(parts) == 2:
                t = b = parts[0]
                r = l = parts[1]
            elif len(parts) == 4:
                t, r, b, l = parts
            else:
                continue
            for side, px in zip(SIDES, (t, r, b, l)):
                decls[f"{prop}_{side}"] = max(0, px)
        elif prop.startswith(("margin-", "padding-")):
            base, _, side = prop.partition("-")
            if side in SIDES:
                px = _parse_px(value)
                if px is not None:
                    decls[f"{base}_{side}"] = max(0, px)
        elif prop == "display":
            v = value.lower()
            if v in ("block", "row"):
                decls["flow"] = v
        elif prop == "visibility":
            v = value.lower()
            if v in ("visible", "hidden"):
                decls["visible"] = v == "visible"
    return decls


def parse_stylesheet(css_text: str) -> list[Rule]:
    rules: list[Rule] = []
    # strip comments
    css_text = re.sub(r"/\*.*?\*/", "", css_text, flags=re.S)
    for m in re.finditer(r"([^{}]+)\{([^{}]*)\}", css_text):
        selectors, body = m.group(1), m.group(2)
        decls = parse_declarations(body)
        if not decls:
            continue
        for sel in selectors.split(","):
            sel = sel.strip().lower()
            if not sel or " " in sel or ">" in sel or ":" in sel:
                continue  # combinators / pseudo-classes unsupported
            if sel.startswith("."):
                rules.append(Rule("class", sel[1:], decls))
            elif sel.startswith("#"):
                rules.append(Rule("id", sel[1:], decls))
            elif re.fullmatch(r"[a-z][a-z0-9]*", sel):
                rules.append(Rule("tag", sel, decls))
    return rules


# ---------------------------------------------------------------------------
# HTML tokenizing


def _parse_attributes(text: str) -> dict:
    attrs = {}
    for m in re.finditer(r"([a-zA-Z_:][-a-zA-Z0-9_:.]*)\s*(?:=\s*(\"[^\"]*\"|'[^']*'|[^\s\"'>]*))?", text):
        name = m.group(1).lower()
        value = m.group(2) or ""
        if value[:1] in ("'", '"'):
            value = value[1:-1]
        attrs[name] = value
    return attrs


class _RawNode:
    __slots__ = ("tag", "attrs", "children", "texts")

    def __init__(self, tag: str, attrs: dict):
        self.tag = tag
        self.attrs = attrs
        self.children: list["_RawNode"] = []
        self.texts: list[str] = []


def _tokenize(html_text: str) -> tuple[_RawNode, list[str], Optional[str]]:
    """Build a raw tree; returns (synthetic root, style blocks, title)."""
    root = _RawNode("#root", {})
    stack = [root]
    styles: list[str] = []
    title: Optional[str] = None
    i, n = 0, len(html_text)
    saw_markup = False

    def add_text(t: str):
        if t.strip():
            stack[-1].texts.append(re.sub(r"\s+", " ", t).strip())

    while i < n:
        lt = html_text.find("<", i)
        if lt == -1:
            add_text(html_text[i:])
            break
        if lt > i:
            add_text(html_text[i:lt])
        if html_text.startswith("<!--", lt):
            end = html_text.find("-->", lt)
            i = n if end == -1 else end + 3
            continue
        gt = html_text.find(">", lt)
        if gt == -1:
            add_text(html_text[lt:])
            break
        inner = html_text[lt + 1 : gt].strip()
        i = gt + 1
        if not inner or inner.startswith("!"):
            continue
        saw_markup = True
        if inner.startswith("/"):
            name = inner[1:].strip().lower().split()[0] if inner[1:].strip() else ""
            # close nearest matching open tag; stray closers are ignored
            for depth in range(len(stack) - 1, 0, -1):
                if stack[depth].tag == name:
                    del stack[depth:]
                    break
            continue
        self_closing = inner.endswith("/")
        if self_closing:
            inner = inner[:-1].strip()
        parts = inner.split(None, 1)
        name = parts[0].lower()
        attrs = _parse_attributes(parts[1]) if len(parts) > 1 else {}
        if name in ("style", "script", "title"):
            close = re.search(rf"</{name}\s*>", html_text[i:], flags=re.I)
            raw = html_text[i : i + close.start()] if close else html_text[i:]
            i = i + close.end() if close else n
            if name == "style":
                styles.append(raw)
            elif name == "title" and title is None:
                t = re.sub(r"\s+", " ", raw).strip()
                title = t or None
            continue
        node = _RawNode(name, attrs)
        stack[-1].children.append(node)
        if name not in VOID_TAGS and not self_closing:
            stack.append(node)

    if not saw_markup and not any(t.strip() for t in root.texts):
        raise MalformedInput("no elements and no text content")
    return root, styles, title


def _find_first(raw: _RawNode, tag: str) -> Optional[_RawNode]:
    for child in raw.children:
        if child.tag == tag:
            return child
        found = _find_first(child, tag)
        if found is not None:
            return found
    return None


def _to_styled(raw: _RawNode) -> StyledNode:
    attrs = raw.attrs
    classes = tuple(attrs.get("class", "").split())
    inline = parse_declarations(attrs.get("style", "")) if attrs.get("style") else {}
    declared = {"inline": inline} if inline else {}
    text = " ".join(raw.texts) if raw.texts else None
    children = tuple(_to_styled(c) for c in raw.children if c.tag not in ("head",))
    return StyledNode(
        tag=raw.tag,
        id=attrs.get("id") or None,
        classes=classes,
        text_content=text,
        children=children,
        declared=declared,
    )


def parse_document(html_text: str, device: str = "mobile", source_url: Optional[str] = None) -> StyledDocument:
    """Parse HTML with embedded/inline CSS into a resolved StyledDocument."""
    if device not in DEVICE_WIDTHS:
        raise ValueError(f"unknown device {device!r}")
    raw, styles, title = _tokenize(html_text)
    body_raw = _find_first(raw, "body")
    if body_raw is not None:
        body = _to_styled(body_raw)
        body = replace(body, tag="body")
    else:
        # body-less fragment: everything at top level becomes body content
        head = _find_first(raw, "head")
        kids = []
        for child in raw.children:
            if child.tag in ("html",):
                kids.extend(c for c in child.children if c.tag not in ("head",))
            elif child is not head and child.tag not in ("head",):
                kids.append(child)
        wrapper = _RawNode("body", {})
        wrapper.children = kids
        wrapper.texts = raw.texts
        body = _to_styled(wrapper)
    rules = []
    for block in styles:
        rules.extend(parse_stylesheet(block))
    doc = StyledDocument(
        root=body,
        device=device,
        viewport_width_px=DEVICE_WIDTHS[device],
        source_url=source_url,
        stylesheet=tuple(rules),
        title=title,
    )
    return resolve_styles(doc)


# ---------------------------------------------------------------------------
# Style resolution


def _declared_for(node: StyledNode, stylesheet: tuple[Rule, ...]) -> dict:
    declared: dict = {}
    for rule in stylesheet:
        matches = (
            (rule.kind == "tag" and rule.key == node.tag)
            or (rule.kind == "class" and rule.key in node.classes)
            or (rule.kind == "id" and rule.key == node.id)
        )
        if matches:
            declared.setdefault(rule.kind, {}).update(rule.decls)
    inline = node.declared.get("inline")
    if inline:
        declared["inline"] = dict(inline)
    return declared


def _resolve_node(node: StyledNode, parent_resolved: Optional[dict], stylesheet: tuple[Rule, ...]) -> StyledNode:
    declared = _declared_for(node, stylesheet)
    resolved = dict(DEFAULTS)
    if parent_resolved is not None:
        for prop in INHERITED:
            resolved[prop] = parent_resolved[prop]
    for origin in ORIGINS:  # tag < class < id < inline
        resolved.update(declared.get(origin, {}))
    children = tuple(_resolve_node(c, resolved, stylesheet) for c in node.children)
    return replace(node, declared=declared, resolved=resolved, children=children)


def resolve_styles(doc: StyledDocument) -> StyledDocument:
    """Recompute every node's total resolved style map."""
    return replace(doc, root=_resolve_node(doc.root, None, doc.stylesheet))


# ---------------------------------------------------------------------------
# Serialization


def _css_value(prop: str, value) -> str:
    if prop in ("color", "background_color"):
        return "#%02x%02x%02x" % value
    if prop == "flow":
        return value
    if prop == "visible":
        return "visible" if value else "hidden"
    return f"{value}px"


_CSS_NAMES = {
    "color": "color",
    "background_color": "background-color",
    "font_size": "font-size",
    "flow": "display",
    "visible": "visibility",
    **{f"margin_{s}": f"margin-{s}" for s in SIDES},
    **{f"padding_{s}": f"padding-{s}" for s in SIDES},
}


def _decls_text(decls: dict) -> str:
    return ";".join(f"{_CSS_NAMES[p]}:{_css_value(p, v)}" for p, v in decls.items())


def _node_html(node: StyledNode, out: list[str]) -> None:
    attrs = ""
    if node.id:
        attrs += f' id="{escape(node.id, quote=True)}"'
    if node.classes:
        attrs += f' class="{escape(" ".join(node.classes), quote=True)}"'
    inline = node.declared.get("inline")
    if inline:
        attrs += f' style="{escape(_decls_text(inline), quote=True)}"'
    out.append(f"<{node.tag}{attrs}>")
    if node.text_content:
        out.append(escape(node.text_content))
    for child in node.children:
        _node_html(child, out)
    out.append(f"</{node.tag}>")


def serialize(doc: StyledDocument) -> str:
    """Emit HTML that re-parses to a tree with identical resolved styles."""
    out: list[str] = []
    if doc.title:
        out.append(f"<title>{escape(doc.title)}</title>")
    out.append("<style>")
    for rule in doc.stylesheet:
        prefix = {"tag": "", "class": ".", "id": "#"}[rule.kind]
        out.append(f"{prefix}{rule.key}{{{_decls_text(rule.decls)}}}")
    out.append("</style>")
    _node_html(doc.root, out)
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Tree helpers (used by the jitter engine)


def iter_nodes(root: StyledNode, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], StyledNode]]:
    """Depth-first (document order) traversal yielding (path, node)."""
    yield path, root
    for i, child in enumerate(root.children):
        yield from iter_nodes(child, path + (i,))


def node_at(root: StyledNode, path: tuple[int, ...]) -> StyledNode:
    node = root
    for i in path:
        node = node.children[i]
    return node


def _apply_updates(node: StyledNode, path: tuple[int, ...], inline_updates: dict, strip: set) -> StyledNode:
    children = tuple(
        _apply_updates(c, path + (i,), inline_updates, strip) for i, c in enumerate(node.children)
    )
    declared = {k: dict(v) for k, v in node.declared.items()}
    if path in strip:
        declared = {}
        node = replace(node, id=None, classes=())
    if path in inline_updates:
        inline = dict(declared.get("inline", {}))
        inline.update(inline_updates[path])
        declared["inline"] = inline
    return replace(node, children=children, declared=declared)


def with_inline(doc: StyledDocument, inline_updates: dict, strip_declared: set = frozenset()) -> StyledDocument:
    """New document with inline declarations merged onto nodes at given paths.

    `strip_declared` paths lose all prior declarations (and their selector
    hooks) before the update applies. The result is re-resolved.
    """
    root = _apply_updates(doc.root, (), inline_updates, set(strip_declared))
    return resolve_styles(replace(doc, root=root))


def default_caption(doc: StyledDocument) -> Optional[str]:
    """Caption fallback: document title, else first heading text."""
    if doc.title:
        return doc.title
    for _, node in iter_nodes(doc.root):
        if node.tag in ("h1", "h2", "h3", "h4", "h5", "h6") and node.text_content:
            return node.text_content
    return None

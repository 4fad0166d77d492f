"""Block layout and rasterization."""

import os
import stat

import numpy as np
import pytest

from uiq.jitter import apply_jitter
from uiq.raster import layout, load_png, rasterize, render_document, save_png
from uiq.styledoc import parse_document


def test_single_text_line_height():
    # 10-char text at font 16 in a 390px viewport: one line, round(1.2*16)=19
    doc = parse_document("<body><div>0123456789</div></body>", "mobile")
    box = layout(doc)
    child = box.children[0]
    assert len(child.text_lines) == 1
    assert child.height == 19
    assert child.text_lines[0].width == pytest.approx(0.6 * 16 * 10)


def test_box_model_margin_padding():
    doc = parse_document('<body><div style="margin:10px;padding:5px">text</div></body>', "mobile")
    box = layout(doc)
    child = box.children[0]
    assert child.x == 10  # outer (border box) starts after the margin
    assert child.text_lines[0].x == 15  # content starts after the padding
    assert child.width == 390 - 20


def test_empty_document_root_box():
    doc = parse_document("<body></body>", "mobile")
    box = layout(doc)
    assert (box.x, box.y, box.width, box.height) == (0, 0, 390, 0)


def test_uniform_background_fill():
    doc = parse_document("<body></body>", "mobile")
    bitmap = rasterize(layout(doc), doc)
    assert bitmap.height == 224  # minimum page height
    assert np.all(bitmap.pixels == 255)


def test_glyph_cells_painted_in_text_color():
    doc = parse_document("<body><div>MMMMMMMM</div></body>", "mobile")
    bitmap = rasterize(layout(doc), doc)
    # inside the first glyph cell: line starts at y=0, glyph v-offset = (19-13)/2
    assert tuple(bitmap.pixels[9, 4]) == (0, 0, 0)
    # outside any text: white
    assert tuple(bitmap.pixels[100, 380]) == (255, 255, 255)


def test_full_contrast_jitter_erases_text():
    doc = parse_document("<body><div>some visible words here</div></body>", "mobile")
    base = rasterize(layout(doc), doc)
    jittered = apply_jitter(doc, "text_contrast", 1.0, seed=2)
    out = rasterize(layout(jittered), jittered)
    assert np.all(out.pixels == 255)
    assert not np.all(base.pixels == 255)


def test_determinism():
    doc = parse_document(
        "<style>.x{color:#445566;padding:6px}</style><body><div class='x'>abc def</div></body>", "mobile"
    )
    a = rasterize(layout(doc), doc)
    b = rasterize(layout(doc), doc)
    assert np.array_equal(a.pixels, b.pixels)


def _walk(box):
    yield box
    for child in box.children:
        yield from _walk(child)


def test_width_containment():
    html = (
        "<style>.row{display:row}.cell{margin:3px;padding:4px}</style>"
        "<body><div class='row'>"
        "<div class='cell'>aaaa</div><div class='cell'>bbbbbbbb</div><div class='cell'>cc</div></div>"
        "<div style='margin:12px'><p>nested paragraph with words</p></div></body>"
    )
    doc = parse_document(html, "mobile")
    root = layout(doc)
    for box in _walk(root):
        s = box.node.resolved
        content_x0 = box.x + s["padding_left"]
        content_x1 = box.x + box.width - s["padding_right"]
        for child in box.children:
            assert child.x >= content_x0 - 1e-6
            assert child.x + child.width <= content_x1 + 1e-6


def test_hidden_nodes_occupy_no_space():
    html = "<body><div>one line of text</div><div>two line of text</div></body>"
    doc = parse_document(html, "mobile")
    tall = layout(doc).height
    hidden_html = (
        "<body><div>one line of text</div><div style='visibility:hidden'>two line of text</div></body>"
    )
    hidden_doc = parse_document(hidden_html, "mobile")
    assert layout(hidden_doc).height < tall
    assert len(layout(hidden_doc).children) == 1


def test_row_flow_places_children_horizontally():
    html = "<style>.row{display:row}</style><body><div class='row'><span>aa</span><span>bb</span></div></body>"
    doc = parse_document(html, "mobile")
    row = layout(doc).children[0]
    first, second = row.children
    assert second.x > first.x
    assert first.y == second.y


def test_row_flow_wraps():
    cells = "".join(f"<span>cell{i} wide text block</span>" for i in range(6))
    html = f"<style>.row{{display:row}}</style><body><div class='row'>{cells}</div></body>"
    doc = parse_document(html, "mobile")
    row = layout(doc).children[0]
    ys = {c.y for c in row.children}
    assert len(ys) > 1  # wrapped onto multiple rows


def test_png_roundtrip(tmp_path):
    doc = parse_document("<style>.a{color:#aa2233}</style><body><div class='a'>roundtrip</div></body>", "mobile")
    bitmap = rasterize(layout(doc), doc)
    path = tmp_path / "page.png"
    save_png(bitmap, path)
    loaded = load_png(path)
    assert loaded.width == bitmap.width and loaded.height == bitmap.height
    assert np.array_equal(loaded.pixels, bitmap.pixels)


def test_external_renderer_used_when_it_succeeds(tmp_path):
    doc = parse_document("<body><div>external</div></body>", "mobile")
    marker = tmp_path / "render.sh"
    marker.write_text(
        "#!/bin/sh\n"
        "python3 -c \"from PIL import Image; Image.new('RGB', (int($3), 300), (1, 2, 3)).save('$2')\"\n"
    )
    os.chmod(marker, os.stat(marker).st_mode | stat.S_IEXEC)
    bitmap = render_document(doc, external_cmd=str(marker))
    assert (bitmap.width, bitmap.height) == (390, 300)
    assert tuple(bitmap.pixels[0, 0]) == (1, 2, 3)


def test_external_renderer_failure_falls_back(tmp_path):
    doc = parse_document("<body><div>fallback</div></body>", "mobile")
    bad = tmp_path / "bad.sh"
    bad.write_text("#!/bin/sh\nexit 3\n")
    os.chmod(bad, os.stat(bad).st_mode | stat.S_IEXEC)
    builtin = rasterize(layout(doc), doc)
    bitmap = render_document(doc, external_cmd=str(bad))
    assert np.array_equal(bitmap.pixels, builtin.pixels)


def test_missing_external_renderer_falls_back():
    doc = parse_document("<body><div>fallback</div></body>", "mobile")
    builtin = rasterize(layout(doc), doc)
    bitmap = render_document(doc, external_cmd="/does/not/exist")
    assert np.array_equal(bitmap.pixels, builtin.pixels)

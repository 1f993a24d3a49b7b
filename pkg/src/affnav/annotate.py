"""Visual-prompt compositor: numbered candidate markers and path overlays.

All drawing is plain raster writes into numpy buffers — no anti-aliasing, no
platform font stack — so identical inputs produce byte-identical PNGs. Source
images are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PixelPoint

# 12-color cycle for labels (RGB).
LABEL_COLORS = [
    (230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (128, 0, 0),
]

MARKER_RADIUS = 9
PATH_WIDTH = 3

# 5x7 bitmap digits; each glyph is 7 rows of 5 bits, MSB = leftmost column.
_DIGITS = {
    "0": (0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E),
    "1": (0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "2": (0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F),
    "3": (0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E),
    "4": (0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02),
    "5": (0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E),
    "6": (0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E),
    "7": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08),
    "8": (0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E),
    "9": (0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C),
}


@dataclass(frozen=True)
class LegendEntry:
    label: int
    anchor: PixelPoint
    kind: str  # "point" | "path"


@dataclass
class AnnotatedImage:
    image: np.ndarray  # uint8 HxWx3
    legend: list[LegendEntry] = field(default_factory=list)


def label_color(label: int) -> tuple[int, int, int]:
    return LABEL_COLORS[(label - 1) % len(LABEL_COLORS)]


def _draw_disc(img: np.ndarray, u: int, v: int, r: int, color) -> None:
    h, w = img.shape[:2]
    v0, v1 = max(0, v - r), min(h, v + r + 1)
    u0, u1 = max(0, u - r), min(w, u + r + 1)
    if v0 >= v1 or u0 >= u1:
        return
    ys, xs = np.mgrid[v0:v1, u0:u1]
    inside = (ys - v) ** 2 + (xs - u) ** 2 <= r * r
    img[v0:v1, u0:u1][inside] = color


def _draw_text(img: np.ndarray, u: int, v: int, text: str, color) -> None:
    """Draw digits centered at (u, v)."""
    width = len(text) * 6 - 1
    x0 = u - width // 2
    y0 = v - 3
    h, w = img.shape[:2]
    for ch in text:
        glyph = _DIGITS.get(ch)
        if glyph is None:
            x0 += 6
            continue
        for row in range(7):
            bits = glyph[row]
            for col in range(5):
                if bits & (0x10 >> col):
                    y, x = y0 + row, x0 + col
                    if 0 <= y < h and 0 <= x < w:
                        img[y, x] = color
        x0 += 6


def _draw_segment(img: np.ndarray, p0, p1, color, width: int) -> None:
    """Stamp a small disc along the segment at sub-pixel spacing."""
    x0, y0 = p0
    x1, y1 = p1
    length = max(abs(x1 - x0), abs(y1 - y0))
    n = max(1, int(np.ceil(length * 2)))
    r = max(0, width // 2)
    for k in range(n + 1):
        t = k / n
        u = int(round(x0 + (x1 - x0) * t))
        v = int(round(y0 + (y1 - y0) * t))
        _draw_disc(img, u, v, r, color)


def bottom_center_anchor(width: int, height: int) -> PixelPoint:
    """The agent's footpoint convention: bottom-center of the view."""
    return PixelPoint(width / 2.0, float(height - 1))


def draw_points(view: np.ndarray, candidates) -> AnnotatedImage:
    """Overlay numbered discs at each candidate point. Input buffer untouched."""
    img = np.array(view, dtype=np.uint8, copy=True)
    legend = []
    h, w = img.shape[:2]
    for cand in candidates:
        u, v = int(round(cand.px.u)), int(round(cand.px.v))
        if not (0 <= u < w and 0 <= v < h):
            raise ValueError(f"candidate {cand.id} pixel ({u},{v}) out of bounds")
        _draw_disc(img, u, v, MARKER_RADIUS, label_color(cand.id))
        _draw_text(img, u, v, str(cand.id), (255, 255, 255))
        legend.append(LegendEntry(cand.id, cand.px, "point"))
    return AnnotatedImage(img, legend)


def draw_paths(views: dict, candidate_set) -> dict:
    """Overlay each global candidate path onto its view.

    `views` maps ViewDirection -> RgbImage; returns ViewDirection ->
    AnnotatedImage. Each path is a polyline from the view's bottom-center
    anchor through its pixel chain, waypoints circled, global id drawn at the
    terminal.
    """
    out = {}
    imgs = {}
    legends = {}
    for d, view in views.items():
        imgs[d] = np.array(view, dtype=np.uint8, copy=True)
        legends[d] = []
    for entry in candidate_set.entries:
        d = entry.path.view_dir
        if d not in imgs:
            raise ValueError(f"path {entry.global_id} references missing view {d}")
        img = imgs[d]
        h, w = img.shape[:2]
        color = label_color(entry.global_id)
        anchor = bottom_center_anchor(w, h)
        pts = [(anchor.u, anchor.v)] + [(p.u, p.v) for p in entry.pixel_chain]
        for p in entry.pixel_chain:
            if not (0 <= p.u < w and 0 <= p.v < h):
                raise ValueError(
                    f"path {entry.global_id} pixel ({p.u},{p.v}) outside its view image"
                )
        for a, b in zip(pts[:-1], pts[1:]):
            _draw_segment(img, a, b, color, PATH_WIDTH)
        for p in entry.pixel_chain:
            _draw_disc(img, int(round(p.u)), int(round(p.v)), 5, color)
        term = pts[-1]
        tu, tv = int(round(term[0])), int(round(term[1]))
        _draw_disc(img, tu, tv, MARKER_RADIUS, color)
        _draw_text(img, tu, tv, str(entry.global_id), (255, 255, 255))
        legends[d].append(LegendEntry(entry.global_id, PixelPoint(term[0], term[1]), "path"))
    return {d: AnnotatedImage(imgs[d], legends[d]) for d in views}


def save_png(image: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), "RGB").save(path, format="PNG")


def encode_png(image: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()

"""Annotated overlay: organs tinted by class, tree edges, red pruning markers."""

from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageDraw

from .organs import OrganClass

CLASS_COLORS = {
    OrganClass.MAIN_CORDON: (0, 0, 139),
    OrganClass.ARM: (0, 160, 0),
    OrganClass.SPUR: (255, 140, 0),
    OrganClass.CANE: (135, 206, 250),
    OrganClass.NODE: (255, 255, 0),
}
ORPHAN_COLOR = (255, 0, 255)
EDGE_COLOR = (255, 255, 255)
POINT_COLOR = (255, 0, 0)
TINT_ALPHA = 0.55
MARKER_RADIUS = 3
TICK_LENGTH = 9


def _canvas(image, width, height):
    if image is None:
        return np.zeros((height, width, 3), dtype=np.uint8)
    arr = np.asarray(image.convert("RGB") if isinstance(image, Image.Image) else image)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return np.array(arr[:, :, :3], dtype=np.uint8)


def render_overlay(image, model, points, width=None, height=None):
    """Draw ``model`` and ``points`` over ``image`` (or a black canvas) and return a PIL image."""
    width = model.width if width is None else width
    height = model.height if height is None else height
    base = _canvas(image, width, height)
    if not model.items and not points:
        return Image.fromarray(base)

    orphaned = {n.id for top in model.orphans for n in top.walk()}
    out = base.astype(np.float64)
    for cls in OrganClass:
        for item in model.items.values():
            if item.organ_class is not cls:
                continue
            color = ORPHAN_COLOR if item.id in orphaned else CLASS_COLORS[cls]
            m = item.mask
            out[m] = (1 - TINT_ALPHA) * out[m] + TINT_ALPHA * np.array(color, dtype=np.float64)
    img = Image.fromarray(np.rint(out).astype(np.uint8))
    draw = ImageDraw.Draw(img)

    for item in model.items.values():
        if item.parent is not None and item.origin_px and item.parent.origin_px:
            draw.line([item.parent.origin_px, item.origin_px], fill=EDGE_COLOR, width=1)

    for p in points:
        x, y = p.position_px
        dx, dy = math.cos(p.angle_rad) * TICK_LENGTH, math.sin(p.angle_rad) * TICK_LENGTH
        draw.line([(x - dx, y - dy), (x + dx, y + dy)], fill=POINT_COLOR, width=1)
        r = MARKER_RADIUS
        draw.ellipse([x - r, y - r, x + r, y + r], fill=POINT_COLOR)
    return img

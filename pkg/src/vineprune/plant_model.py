"""Tree-structured plant model built from organ instance masks.

Connections are found pair by pair (cordon->arm, ..., cane->node) with the
iterative dilate-and-overlap search; the first pass to claim a child wins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthError, EmptyModelError
from .io_ingest import mask_bbox
from .organs import OrganClass
from .raster_geometry import (
    crop_window,
    deproject,
    dilate,
    encode_label_map,
    estimate_real_depth,
    overlap_labels,
    slot_index,
)

log = logging.getLogger(__name__)

ROOT_BAND_PX = 5


@dataclass(frozen=True)
class Connection:
    parent_id: int
    iteration: int
    slot: int
    fallback: bool
    intersection: np.ndarray = field(repr=False, compare=False)


@dataclass(eq=False)
class GrapevineItem:
    instance: object
    origin_px: tuple | None = None
    endpoint_px: tuple | None = None
    origin_3d: object = None
    endpoint_3d: object = None
    parent: GrapevineItem | None = field(default=None, repr=False)
    children: list = field(default_factory=list, repr=False)
    distance_from_parent: float = 0.0
    connection: Connection | None = None
    flags: list = field(default_factory=list)

    @property
    def id(self):
        return self.instance.instance_id

    @property
    def organ_class(self):
        return self.instance.organ_class

    @property
    def mask(self):
        return self.instance.mask

    @property
    def bbox(self):
        return self.instance.bbox

    def walk(self):
        """Depth-first pre-order over this subtree."""
        stack = [self]
        while stack:
            item = stack.pop()
            yield item
            stack.extend(reversed(item.children))


@dataclass(eq=False)
class PlantModel:
    roots: list
    orphans: list
    items: dict
    width: int
    height: int
    intrinsics: object = None
    depth: object = field(default=None, repr=False)

    def walk(self):
        for top in self.roots + self.orphans:
            yield from top.walk()

    def edges(self):
        return {(it.parent.id, it.id) for it in self.items.values() if it.parent is not None}

    def height_of_tree(self):
        def h(item):
            return 1 + max((h(c) for c in item.children), default=0)

        return max((h(r) for r in self.roots), default=0)


def build_label_map(items, shape=None):
    """Label raster for items of one class: 0 background, ``id + 1`` elsewhere."""
    if shape is None:
        if not items:
            raise ValueError("shape is required for an empty item list")
        shape = items[0].mask.shape
    return encode_label_map([it.mask for it in items], [it.id for it in items], shape)


def _search(label_map, base_mask, params, lowest, target_slot):
    mask = base_mask
    for it in range(params.max_iter + 1):
        if it > 0:
            mask = dilate(mask, params.dilation)
        hits = overlap_labels(label_map, mask)
        if not hits:
            continue
        # spatially lowest = greatest mean row; ties go to the lower instance ID
        rows = [(pix[:, 0].mean(), iid, pix) for iid, pix in hits]
        if lowest:
            _, iid, pix = min(rows, key=lambda t: (-t[0], t[1]))
        else:
            _, iid, pix = min(rows, key=lambda t: (t[0], t[1]))
        slot = slot_index(mask_bbox(mask), pix, params.n_slots)
        if slot == target_slot:
            return iid, it, slot, pix
    return None


def compute_connections(items_a, items_b, params, use_bbox=False, label_map=None):
    """Map child instance ID -> :class:`Connection` for children that attach to a parent.

    ``use_bbox`` replaces each child mask with its filled bounding box.
    """
    if not items_a or not items_b:
        return {}
    shape = items_b[0].mask.shape
    if label_map is None:
        label_map = build_label_map(items_a, shape)
    margin = params.dilation * params.max_iter + 1
    out = {}
    for item in items_b:
        win = crop_window(item.bbox, margin, shape)
        base = item.instance.bbox_mask()[win] if use_bbox else item.mask[win]
        labels = label_map[win]
        hit = _search(labels, base, params, lowest=True, target_slot=params.n_slots)
        fallback = False
        if hit is None and params.include_top:
            hit = _search(labels, base, params, lowest=False, target_slot=1)
            fallback = hit is not None
        if hit is None:
            continue
        iid, it, slot, pix = hit
        pix = pix + np.array([win[0].start, win[1].start])
        out[item.id] = Connection(iid, it, slot, fallback, pix)
    return out


def _centroid(pix):
    return (float(pix[:, 1].mean()), float(pix[:, 0].mean()))


def _farthest(mask, origin):
    pix = np.argwhere(mask)
    d2 = (pix[:, 1] - origin[0]) ** 2 + (pix[:, 0] - origin[1]) ** 2
    r, c = pix[int(np.argmax(d2))]
    return (float(c), float(r))


def root_origin(mask, side="left"):
    """Centroid of the first ``ROOT_BAND_PX`` occupied columns from ``side``."""
    cols = np.flatnonzero(mask.any(axis=0))
    band = cols[:ROOT_BAND_PX] if side == "left" else cols[-ROOT_BAND_PX:]
    sub = mask[:, band]
    pix = np.argwhere(sub)
    pix[:, 1] = band[pix[:, 1]]
    return _centroid(pix)


def _to_3d(px, depth, intrinsics, config):
    window = 2 if config is None else config.depth_window
    radius = 15 if config is None else config.correction_max_radius
    z = estimate_real_depth(px, depth, intrinsics, window=window, max_radius=radius)
    return deproject(px, z, intrinsics)


def derive_geometry(item, parent=None, intersection=None, depth=None, intrinsics=None, config=None):
    """Fill origin/endpoint (2D and, where depth allows, 3D) and parent distance."""
    if intersection is not None:
        item.origin_px = _centroid(intersection)
    elif parent is None and item.organ_class is OrganClass.MAIN_CORDON:
        item.origin_px = root_origin(item.mask, "left" if config is None else config.root_side)
    else:
        item.origin_px = _centroid(np.argwhere(item.mask))
    item.endpoint_px = _farthest(item.mask, item.origin_px)
    item.distance_from_parent = (
        math.dist(parent.origin_px, item.origin_px) if parent is not None else 0.0
    )
    if depth is not None and intrinsics is not None:
        try:
            item.origin_3d = _to_3d(item.origin_px, depth, intrinsics, config)
            item.endpoint_3d = _to_3d(item.endpoint_px, depth, intrinsics, config)
        except DepthError:
            item.origin_3d = item.endpoint_3d = None
            item.flags.append("no_depth")
    return item


def assemble_model(records, depth=None, intrinsics=None, config=None):
    """Connect every record into a forest rooted at the main cordons."""
    from .config import PipelineConfig

    config = config or PipelineConfig()
    if not records:
        raise EmptyModelError("scene has no instances")
    items = {r.instance_id: GrapevineItem(r) for r in sorted(records, key=lambda r: r.instance_id)}
    by_class = {c: [it for it in items.values() if it.organ_class is c] for c in OrganClass}
    if not by_class[OrganClass.MAIN_CORDON]:
        raise EmptyModelError("scene has no main cordon instance")
    shape = records[0].mask.shape

    label_maps = {}
    claimed = {}
    for parent_cls, child_cls in config.connection_order:
        parents = by_class[parent_cls]
        children = [it for it in by_class[child_cls] if it.id not in claimed]
        if not parents or not children:
            continue
        if parent_cls not in label_maps:
            label_maps[parent_cls] = build_label_map(parents, shape)
        found = compute_connections(
            parents,
            children,
            config.params_for(parent_cls, child_cls),
            use_bbox=child_cls is OrganClass.NODE,
            label_map=label_maps[parent_cls],
        )
        claimed.update(found)
        log.debug("%s->%s: %d connections", parent_cls.value, child_cls.value, len(found))

    for cid in sorted(claimed):
        child, conn = items[cid], claimed[cid]
        child.parent = items[conn.parent_id]
        child.connection = conn
        child.parent.children.append(child)

    roots = list(by_class[OrganClass.MAIN_CORDON])
    orphans = [it for it in items.values() if it.parent is None and it.organ_class is not OrganClass.MAIN_CORDON]
    for top in roots + orphans:
        derive_geometry(top, None, None, depth, intrinsics, config)
        if top in orphans:
            top.flags.append("orphan")
        stack = [top]
        while stack:
            node = stack.pop()
            for child in node.children:
                derive_geometry(child, node, child.connection.intersection, depth, intrinsics, config)
                stack.append(child)
            node.children.sort(key=lambda c: (c.distance_from_parent, c.id))

    return PlantModel(roots, orphans, items, shape[1], shape[0], intrinsics, depth)

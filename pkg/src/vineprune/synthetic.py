"""Procedural grapevine scenes with closed-form ground truth.

Organs are axis-aligned rectangles laid out around a horizontal cordon, so
every ground-truth quantity (tree, origins, vigor, node positions, expected
cut points) follows from the layout without touching a mask.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .assessments import Growth, Location, RegionAssessment
from .config import PipelineConfig
from .errors import ScoringError, SpecError
from .io_ingest import CameraIntrinsics, DepthImage, InstanceRecord, records_to_coco, save_depth
from .organs import OrganClass
from .plant_model import Connection, GrapevineItem, PlantModel
from .pruning_points import CutType, select_cut
from .raster_geometry import deproject

DEFAULT_DEPTH_OFFSETS = {
    OrganClass.MAIN_CORDON: 0.0,
    OrganClass.ARM: -0.004,
    OrganClass.SPUR: -0.006,
    OrganClass.CANE: -0.010,
    OrganClass.NODE: -0.012,
}


@dataclass
class CaneSpec:
    length: int = 120
    width: int = 10
    n_nodes: int = 3
    node_offset: int = 15
    node_spacing: int = 22


@dataclass
class RegionSpec:
    """One pruning region. ``attach > 0`` overlaps the cordon by that many rows; ``<= 0`` leaves a gap."""

    kind: str = "spur"
    x: int = 100
    direction: str = "up"
    attach: int = 2
    length: int = 40
    canes: list = field(default_factory=lambda: [CaneSpec()])


@dataclass
class SceneSpec:
    seed: int = 0
    width: int = 640
    height: int = 480
    cordon_x0: int = 20
    cordon_length: int = 600
    cordon_row: int = 228
    cordon_diameter: int = 24
    regions: list = field(default_factory=list)
    depth_plane: float = 1.0
    depth_offsets: dict = field(default_factory=lambda: dict(DEFAULT_DEPTH_OFFSETS))
    depth_noise: float = 0.0
    fx: float = 1000.0
    fy: float = 1000.0

    @classmethod
    def uniform(cls, n_spurs=5, canes_per_spur=1, nodes_per_cane=3, spacing=110, seed=0, **kw):
        regions = [
            RegionSpec(
                kind="spur",
                x=80 + i * spacing,
                canes=[CaneSpec(n_nodes=nodes_per_cane) for _ in range(canes_per_spur)],
            )
            for i in range(n_spurs)
        ]
        return cls(seed=seed, regions=regions, **kw)

    def validate(self):
        if min(self.width, self.height, self.cordon_length, self.cordon_diameter) <= 0:
            raise SpecError("canvas and cordon dimensions must be positive")
        if self.depth_plane <= 0 or self.fx <= 0 or self.fy <= 0:
            raise SpecError("depth plane and focal lengths must be positive")
        xs = sorted(r.x for r in self.regions)
        if any(b - a < 1 for a, b in zip(xs, xs[1:])):
            raise SpecError("regions must be at least 1 px apart")
        for r in self.regions:
            if r.kind not in ("spur", "arm", "cane"):
                raise SpecError(f"unknown region kind {r.kind!r}")
            if r.direction not in ("up", "down"):
                raise SpecError(f"unknown direction {r.direction!r}")
            if r.kind == "cane" and len(r.canes) != 1:
                raise SpecError("a cane region is exactly one cane")
            if r.kind != "cane" and r.length <= 0:
                raise SpecError("region length must be positive")
            for c in r.canes:
                if c.length <= 0 or c.width < 3:
                    raise SpecError("canes need positive length and width >= 3")
                if c.n_nodes and c.node_offset + (c.n_nodes - 1) * c.node_spacing + 3 > c.length - 1:
                    raise SpecError("nodes do not fit on the cane")


def random_spec(seed):
    """Member ``seed`` of the default scene grid."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 6))
    spacing = int(rng.integers(100, 125))
    plane = float(rng.uniform(0.9, 1.1))
    regions = []
    for i in range(n):
        kind = str(rng.choice(["spur", "cane", "arm"], p=[0.6, 0.2, 0.2]))
        direction = "down" if rng.random() < 0.2 else "up"
        mode = rng.random()
        if mode < 0.6:
            attach = int(rng.integers(1, 5))
        elif mode < 0.9:
            attach = -int(rng.integers(0, 3))
        else:
            attach = 14
        n_canes = 1 if kind != "spur" else int(rng.integers(1, 3))
        max_len = 110 if kind == "arm" else 150
        canes = []
        for _ in range(n_canes):
            length = int(rng.integers(90, max_len + 1))
            n_nodes = int(rng.integers(0, 5))
            spacing_n = int(rng.integers(18, 27))
            offset = int(rng.integers(12, 19))
            while n_nodes and offset + (n_nodes - 1) * spacing_n + 3 > length - 1:
                n_nodes -= 1
            canes.append(CaneSpec(length, int(rng.integers(8, 13)), n_nodes, offset, spacing_n))
        length = int(rng.integers(60, 81)) if kind == "arm" else int(rng.integers(35, 51))
        regions.append(RegionSpec(kind, 70 + i * spacing, direction, attach, length, canes))
    return SceneSpec(seed=seed, regions=regions, depth_plane=plane)


def default_grid(n=200):
    return [random_spec(s) for s in range(n)]


@dataclass(frozen=True)
class _Rect:
    r0: int
    r1: int
    c0: int
    c1: int

    def polygon(self):
        return [[self.c0, self.r0, self.c1, self.r0, self.c1, self.r1, self.c0, self.r1]]

    def centre(self):
        return ((self.c0 + self.c1) / 2.0, (self.r0 + self.r1) / 2.0)

    def intersect(self, o):
        r = _Rect(max(self.r0, o.r0), min(self.r1, o.r1), max(self.c0, o.c0), min(self.c1, o.c1))
        return r if r.r0 <= r.r1 and r.c0 <= r.c1 else None

    def corners(self):
        return [(self.c0, self.r0), (self.c1, self.r0), (self.c0, self.r1), (self.c1, self.r1)]


@dataclass
class SceneBundle:
    spec: SceneSpec
    records: list
    depth: DepthImage
    intrinsics: CameraIntrinsics
    truth_tree: PlantModel
    truth_assessments: dict
    truth_points: list
    rects: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self):
        return (self.spec.height, self.spec.width)


class _Builder:
    def __init__(self, spec):
        self.spec = spec
        self.rects = {}
        self.classes = {}
        self.parent = {}
        self.origin = {}
        self.direction = {}
        self.next_id = 0

    def add(self, cls, rect, parent=None, direction="up"):
        s = self.spec
        if rect.r0 < 0 or rect.c0 < 0 or rect.r1 >= s.height or rect.c1 >= s.width:
            raise SpecError(f"{cls.value} rectangle {rect} exceeds the {s.width}x{s.height} canvas")
        iid = self.next_id
        self.next_id += 1
        self.rects[iid] = rect
        self.classes[iid] = cls
        self.direction[iid] = direction
        if parent is not None:
            self.parent[iid] = parent
            self.origin[iid] = self._contact(rect, self.rects[parent], direction)
        return iid

    @staticmethod
    def _contact(child, parent, direction):
        inter = child.intersect(parent)
        if inter is not None:
            return inter.centre()
        col = (max(child.c0, parent.c0) + min(child.c1, parent.c1)) / 2.0
        return (col, float(parent.r0 if direction == "up" else parent.r1))

    def rows(self, u0, u1, direction):
        s = self.spec
        if direction == "up":
            top = s.cordon_row - 1
            return top - u1, top - u0
        bottom = s.cordon_row + s.cordon_diameter
        return bottom + u0, bottom + u1


def _layout(spec):
    b = _Builder(spec)
    cordon = b.add(
        OrganClass.MAIN_CORDON,
        _Rect(spec.cordon_row, spec.cordon_row + spec.cordon_diameter - 1, spec.cordon_x0, spec.cordon_x0 + spec.cordon_length - 1),
    )
    regions = []
    for reg in spec.regions:
        d = reg.direction
        u0 = -reg.attach
        if reg.kind == "cane":
            base_id = None
            cane_anchor = [(u0, reg.x - reg.canes[0].width // 2, cordon)]
        else:
            wc = max((c.width for c in reg.canes), default=10)
            width = max(16, wc + 4) if reg.kind == "arm" else (wc + 4 if len(reg.canes) == 1 else 2 * wc)
            bc0 = reg.x - width // 2
            r0, r1 = b.rows(u0, u0 + reg.length - 1, d)
            cls = OrganClass.ARM if reg.kind == "arm" else OrganClass.SPUR
            base_id = b.add(cls, _Rect(r0, r1, bc0, bc0 + width - 1), cordon, d)
            top_u = u0 + reg.length - 1
            if not reg.canes:
                cane_anchor = []
            elif len(reg.canes) == 1:
                cane_anchor = [(top_u - 2, reg.x - reg.canes[0].width // 2, base_id)]
            else:
                w0 = reg.canes[0].width
                cane_anchor = [(top_u - 2, bc0, base_id), (top_u - 2, bc0 + w0 + 2, base_id)]
        canes = []
        for cane, (cu0, cc0, parent) in zip(reg.canes, cane_anchor):
            r0, r1 = b.rows(cu0, cu0 + cane.length - 1, d)
            cid = b.add(OrganClass.CANE, _Rect(r0, r1, cc0, cc0 + cane.width - 1), parent, d)
            nodes = []
            for j in range(cane.n_nodes):
                u = cu0 + cane.node_offset + j * cane.node_spacing
                nr0, nr1 = b.rows(u - 2, u + 2, d)
                nodes.append(b.add(OrganClass.NODE, _Rect(nr0, nr1, cc0 + 1, cc0 + cane.width - 2), cid, d))
            canes.append((cid, nodes))
        regions.append((reg, base_id if base_id is not None else canes[0][0], canes))
    return b, cordon, regions


def _depth_raster(spec, b, rng):
    metres = np.zeros((spec.height, spec.width))
    painted = np.zeros((spec.height, spec.width), dtype=bool)
    paint_order = [OrganClass.MAIN_CORDON, OrganClass.ARM, OrganClass.SPUR, OrganClass.CANE, OrganClass.NODE]
    for cls in paint_order:
        for iid, rect in b.rects.items():
            if b.classes[iid] is cls:
                metres[rect.r0 : rect.r1 + 1, rect.c0 : rect.c1 + 1] = spec.depth_plane + spec.depth_offsets.get(cls, 0.0)
                painted[rect.r0 : rect.r1 + 1, rect.c0 : rect.c1 + 1] = True
    if spec.depth_noise > 0:
        metres[painted] += rng.normal(0.0, spec.depth_noise, size=int(painted.sum()))
    return metres


def _far_corner(rect, origin):
    return max(rect.corners(), key=lambda p: (math.dist(p, origin), -p[1], -p[0]))


def generate_scene(spec):
    """Render ``spec`` into instance records, depth and ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    b, cordon, regions = _layout(spec)
    records = [
        InstanceRecord.from_polygons(iid, b.classes[iid], b.rects[iid].polygon(), spec.height, spec.width)
        for iid in sorted(b.rects)
    ]
    intr = CameraIntrinsics(spec.fx, spec.fy, (spec.width - 1) / 2.0, (spec.height - 1) / 2.0, 0.001)
    depth = DepthImage.from_meters(_depth_raster(spec, b, rng), 0.001)

    def z_of(iid):
        return spec.depth_plane + spec.depth_offsets.get(b.classes[iid], 0.0)

    items = {r.instance_id: GrapevineItem(r) for r in records}
    crect = b.rects[cordon]
    for iid, item in items.items():
        rect = b.rects[iid]
        if iid == cordon:
            item.origin_px = (crect.c0 + 2.0, (crect.r0 + crect.r1) / 2.0)
        elif iid in b.origin:
            item.origin_px = b.origin[iid]
        else:
            item.origin_px = rect.centre()
        item.endpoint_px = tuple(float(v) for v in _far_corner(rect, item.origin_px))
        item.origin_3d = deproject(item.origin_px, z_of(iid), intr)
        item.endpoint_3d = deproject(item.endpoint_px, z_of(iid), intr)
    for iid, pid in sorted(b.parent.items()):
        child, parent = items[iid], items[pid]
        child.parent = parent
        child.distance_from_parent = math.dist(parent.origin_px, child.origin_px)
        up = b.direction[iid] == "up" or b.classes[iid] is OrganClass.NODE
        child.connection = Connection(pid, 0, 0, not up, np.empty((0, 2), dtype=np.int64))
        parent.children.append(child)
    for item in items.values():
        item.children.sort(key=lambda c: (c.distance_from_parent, c.id))
    truth = PlantModel([items[cordon]], [], items, spec.width, spec.height, intr, depth)

    config = PipelineConfig()
    assessments = {}
    points = []
    order = sorted(regions, key=lambda t: t[0].x)
    for k, (reg, region_id, canes) in enumerate(order):
        basal = items[canes[0][0]] if canes else None
        judged = basal if basal is not None else items[region_id]
        parent_cls = judged.parent.organ_class
        if reg.attach > spec.cordon_diameter // 4:
            loc = Location.INTERMEDIATE
        else:
            loc = Location.DORSAL if reg.direction == "up" else Location.VENTRAL
        neigh = [
            math.dist(items[region_id].origin_3d, items[order[j][1]].origin_3d) if 0 <= j < len(order) else math.inf
            for j in (k - 1, k + 1)
        ]
        a = RegionAssessment(
            region_id=region_id,
            location=loc,
            cane_count=len(canes),
            growth=Growth.VERTICAL if canes else Growth.UNKNOWN,
            vigor_m=(reg.canes[0].width - 1) * z_of(basal.id) / spec.fx if canes else None,
            is_new=parent_cls is OrganClass.MAIN_CORDON,
            is_replacement=parent_cls is OrganClass.ARM,
            adjacent_distance_m=max(neigh) if config.adjacency_metric == "max" else min(neigh),
            basal_cane_id=None if basal is None else basal.id,
        )
        assessments[region_id] = a
        nodes = [items[n] for n in canes[0][1]] if canes else []
        points.extend(_truth_points(a, items[region_id], basal, nodes, config, spec, z_of))
    return SceneBundle(spec, records, depth, intr, truth, assessments, points, dict(b.rects))


def _towards(p1, p2, dist_px):
    D = math.dist(p1, p2)
    if D == 0:
        return tuple(p1)
    t = min(dist_px, D) / D
    return (p1[0] + t * (p2[0] - p1[0]), p1[1] + t * (p2[1] - p1[1]))


def _truth_points(a, region, basal, nodes, config, spec, z_of):
    cut = select_cut(a, config)
    if cut is None:
        return []
    N = config.spur_nodes_N
    px_per_m = spec.fx / z_of(region.id if basal is None else basal.id)
    d_px = config.cut_offset_d * px_per_m
    out = []

    def emit(pos, target, role, fallback=False):
        out.append(
            {"position_px": (float(pos[0]), float(pos[1])), "cut": cut, "region_id": region.id,
             "target_item_id": target.id, "role": role, "fallback": fallback}
        )

    if cut is CutType.CLEAN_CUT or basal is None:
        emit(_towards(region.origin_px, region.endpoint_px, d_px), region, "region")
    elif cut is CutType.BASE_BUD_CUT:
        p2 = nodes[0].origin_px if nodes else basal.endpoint_px
        emit(_towards(basal.origin_px, p2, d_px), basal, "basal_cane")
    else:
        if len(nodes) >= N + 1:
            a_, b_ = nodes[N - 1].origin_px, nodes[N].origin_px
            emit(((a_[0] + b_[0]) / 2, (a_[1] + b_[1]) / 2), basal, "basal_cane")
        else:
            emit(_towards(basal.origin_px, basal.endpoint_px, d_px * (N + 1)), basal, "basal_cane", True)
        parent = basal.parent
        if not a.is_new and parent.organ_class is not OrganClass.MAIN_CORDON:
            emit(_towards(basal.origin_px, parent.endpoint_px, d_px), parent, "parent")
    return out


# --- degradation -----------------------------------------------------------


def perturb(bundle, ops, seed=0):
    """Apply occlusion / noise ops to a copy of ``bundle``; ground truth is kept."""
    out = copy.copy(bundle)
    out.records = list(bundle.records)
    out.depth = bundle.depth
    if not ops:
        return out
    rng = np.random.default_rng(seed)
    for op in ops:
        kind = op.get("op")
        if kind == "erase_band":
            out.records = _erase_band(out.records, op, rng)
        elif kind == "depth_noise":
            vals = out.depth.values.astype(np.float64) * out.depth.depth_scale
            valid = out.depth.values > 0
            vals[valid] += rng.normal(0.0, float(op["sigma"]), size=int(valid.sum()))
            vals[valid] = np.maximum(vals[valid], out.depth.depth_scale)
            out.depth = DepthImage.from_meters(np.where(valid, vals, 0.0), out.depth.depth_scale)
        elif kind == "drop":
            out.records = _drop(out.records, op, rng)
        else:
            raise SpecError(f"unknown perturbation op {kind!r}")
    return out


def _select(records, op, rng):
    target = op.get("target", "cane")
    if isinstance(target, int):
        return [r for r in records if r.instance_id == target]
    pool = [r for r in records if r.organ_class.value == target or target == "any"]
    k = int(round(float(op.get("fraction", 1.0)) * len(pool)))
    idx = sorted(rng.choice(len(pool), size=k, replace=False).tolist()) if k else []
    return [pool[i] for i in idx]


def _rect_polygon(mask):
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1], cols[0], cols[-1]
    if mask[r0 : r1 + 1, c0 : c1 + 1].all():
        return tuple(np.array([[c0, r0], [c1, r0], [c1, r1], [c0, r1]], dtype=np.float64).reshape(1, 4, 2))
    return ()


def _erase_band(records, op, rng):
    width = int(op.get("width", 5))
    chosen = {r.instance_id for r in _select(records, op, rng)}
    next_id = max(r.instance_id for r in records) + 1
    out, extra = [], []
    for rec in records:
        if rec.instance_id not in chosen:
            out.append(rec)
            continue
        x0, y0, x1, y1 = rec.bbox
        pos = op.get("position")
        t = float(rng.uniform(0.2, 0.8)) if pos is None else float(pos)
        mask = rec.mask.copy()
        if y1 - y0 >= x1 - x0:
            start = int(round(y0 + t * (y1 - y0))) - width // 2
            mask[max(0, start) : start + width, :] = False
        else:
            start = int(round(x0 + t * (x1 - x0))) - width // 2
            mask[:, max(0, start) : start + width] = False
        labels, n = ndimage.label(mask)
        if n == 0:
            continue
        sizes = ndimage.sum(mask, labels, index=range(1, n + 1))
        keep = int(np.argmax(sizes)) + 1
        for lab in range(1, n + 1):
            frag = labels == lab
            if lab == keep:
                out.append(InstanceRecord.from_mask(rec.instance_id, rec.organ_class, frag, _rect_polygon(frag)))
            else:
                extra.append(InstanceRecord.from_mask(next_id, rec.organ_class, frag, _rect_polygon(frag)))
                next_id += 1
    return out + extra


def _drop(records, op, rng):
    gone = {r.instance_id for r in _select(records, op, rng)}
    return [r for r in records if r.instance_id not in gone]


# --- scoring -----------------------------------------------------------------


def score_model(predicted, truth, strict=True):
    """Edge precision/recall of ``predicted`` against ``truth`` over (parent, child) ID pairs.

    With ``strict`` the two models must cover the same instance IDs; otherwise
    predicted items unknown to the truth are ignored.
    """
    pred_ids = set(predicted.items)
    true_ids = set(truth.items)
    if strict and pred_ids != true_ids:
        raise ScoringError(
            f"instance IDs differ: {len(pred_ids - true_ids)} extra, {len(true_ids - pred_ids)} missing"
        )
    pred = {e for e in predicted.edges() if e[0] in true_ids and e[1] in true_ids}
    true = truth.edges()
    tp = len(pred & true)
    precision = tp / len(pred) if pred else 1.0
    recall = tp / len(true) if true else 1.0
    roots_equal = {r.id for r in predicted.roots} == {r.id for r in truth.roots}
    return {
        "edge_precision": precision,
        "edge_recall": recall,
        "tree_isomorphic": pred == true and roots_equal and (not strict or pred_ids == true_ids),
    }


# --- serialisation -------------------------------------------------------------


def write_bundle(bundle, out_dir):
    """Write annotations.json, depth.png, config.ini and truth.json to ``out_dir``."""
    from .serialize import dumps_json, model_to_dict, assessment_to_dict

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = bundle.spec
    coco = records_to_coco(bundle.records, s.width, s.height, file_name=f"synthetic_{s.seed}.png")
    (out / "annotations.json").write_text(json.dumps(coco, indent=1))
    save_depth(out / "depth.png", bundle.depth)
    i = bundle.intrinsics
    (out / "config.ini").write_text(
        f"fx = {i.fx}\nfy = {i.fy}\ncx = {i.cx}\ncy = {i.cy}\ndepth_scale = {i.depth_scale}\n"
    )
    truth = {
        "spec": dataclasses.asdict(s),
        "tree": model_to_dict(bundle.truth_tree),
        "assessments": [assessment_to_dict(a) for _, a in sorted(bundle.truth_assessments.items())],
        "points": bundle.truth_points,
    }
    (out / "truth.json").write_text(dumps_json(truth))
    return out

"""Cut selection and pruning-point placement."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assessments import Growth, Location
from .errors import CorrectionError, DegenerateSegment, DepthError
from .organs import OrganClass
from .raster_geometry import Point3, deproject, estimate_real_depth

log = logging.getLogger(__name__)


class CutType(str, enum.Enum):
    CLEAN_CUT = "clean_cut"
    BASE_BUD_CUT = "base_bud_cut"
    SPUR_CUT = "spur_cut"
    REPLACEMENT_CUT = "replacement_cut"


SKIP = None

# points carrying these flags make a run "degraded" rather than clean
WARNING_FLAGS = frozenset({"correction_error", "degenerate_segment", "no_metric_scale"})


def _vigor_ok(a, cfg):
    return a.vigor_m is not None and cfg.vigor_min <= a.vigor_m <= cfg.vigor_max


def _vigor_bad(a, cfg):
    return a.vigor_m is not None and not (cfg.vigor_min <= a.vigor_m <= cfg.vigor_max)


# name -> (predicate, outcome); evaluated in config.cut_rules order, first match wins
RULES = {
    "crowded_new": (lambda a, c: a.is_new and a.adjacent_distance_m < c.adjacency_min, CutType.CLEAN_CUT),
    "ventral_new": (lambda a, c: a.is_new and a.location is Location.VENTRAL, CutType.BASE_BUD_CUT),
    "replacement": (lambda a, c: a.is_replacement and a.has_basal_cane, CutType.REPLACEMENT_CUT),
    "vertical_vigorous": (
        lambda a, c: a.has_basal_cane and a.growth is Growth.VERTICAL and _vigor_ok(a, c),
        CutType.SPUR_CUT,
    ),
    "weak_or_leaning": (
        lambda a, c: a.has_basal_cane and (a.growth is Growth.NOT_VERTICAL or _vigor_bad(a, c)),
        CutType.BASE_BUD_CUT,
    ),
    "no_canes": (lambda a, c: a.cane_count == 0, SKIP),
    "default_spur": (lambda a, c: True, CutType.SPUR_CUT),
}


def decide(assessment, config):
    """``(cut or SKIP, rule name)``; falls through to a spur cut if no rule fires."""
    for name in config.cut_rules:
        predicate, outcome = RULES[name]
        if predicate(assessment, config):
            return outcome, name
    return CutType.SPUR_CUT, "fallthrough"


def select_cut(assessment, config):
    return decide(assessment, config)[0]


def interpolate_pruning_point(p1, p2, d):
    """Point at distance ``d`` from ``p1`` towards ``p2`` (``d`` clamped to ``[0, |p1-p2|]``)."""
    a = np.asarray(p1, dtype=np.float64)
    b = np.asarray(p2, dtype=np.float64)
    D = math.dist(a, b)
    if D == 0.0:
        raise DegenerateSegment("p1 and p2 coincide")
    d = min(max(d, 0.0), D)
    w1 = abs(D - d) / D
    w2 = 1.0 - w1
    pp = w1 * a + w2 * b
    return Point3(*pp.tolist()) if pp.size == 3 else tuple(pp.tolist())


def orientation_angle(p1, p2):
    """Cut orientation in radians, perpendicular to the image segment p1-p2."""
    dx = p1[0] - p2[0]
    dy = p1[1] - p2[1]
    if dx == 0 and dy == 0:
        raise DegenerateSegment("p1 and p2 coincide")
    if dx == 0:
        return 0.0
    if dy == 0:
        return math.pi / 2
    ratio = dy / dx
    return math.atan(ratio) - math.copysign(1.0, ratio) * math.pi / 2


def correct_onto_organ(point_px, target_mask, depth=None, max_radius=15):
    """Snap a point onto its organ mask, else onto valid depth, scanning x then y.

    Returns ``(point, corrected)``; raises :class:`CorrectionError` when neither
    is found within ``max_radius``.
    """
    h, w = target_mask.shape
    c, r = int(round(point_px[0])), int(round(point_px[1]))
    if not (0 <= r < h and 0 <= c < w):
        raise CorrectionError(f"point {point_px} is outside the image")
    if target_mask[r, c]:
        return (c, r), False
    order = []
    for k in range(1, int(max_radius) + 1):
        order += [(c + k, r), (c - k, r)]
    for k in range(1, int(max_radius) + 1):
        order += [(c, r + k), (c, r - k)]
    order = [(x, y) for x, y in order if 0 <= x < w and 0 <= y < h]
    for x, y in order:
        if target_mask[y, x]:
            return (x, y), True
    if depth is not None:
        valid = depth.values > 0
        if valid[r, c]:
            return (c, r), False
        for x, y in order:
            if valid[y, x]:
                return (x, y), True
    raise CorrectionError(f"no organ or valid depth within {max_radius} px of {point_px}")


@dataclass
class PruningPoint:
    position_px: tuple
    position_3d: Point3 | None
    angle_rad: float
    cut: CutType
    region_id: int
    target_item_id: int
    corrected: bool = False
    role: str = "basal_cane"
    flags: list = field(default_factory=list)


@dataclass
class _Segment:
    p1: tuple
    p2: tuple
    p1_3d: Point3 | None
    p2_3d: Point3 | None
    target: object
    role: str
    d_m: float | None = None
    fraction: float | None = None
    flags: list = field(default_factory=list)


def _nodes_of(cane):
    return [c for c in cane.children if c.organ_class is OrganClass.NODE]


def _segments(cut, region, assessment, config):
    item, basal = region.item, region.basal_cane
    d = config.cut_offset_d
    N = config.spur_nodes_N

    if cut is CutType.CLEAN_CUT or (basal is None and cut is not CutType.CLEAN_CUT):
        flags = [] if cut is CutType.CLEAN_CUT else ["no_basal_cane"]
        return [_Segment(item.origin_px, item.endpoint_px, item.origin_3d, item.endpoint_3d, item, "region", d, flags=flags)]

    if cut is CutType.BASE_BUD_CUT:
        nodes = _nodes_of(basal)
        if nodes:
            p2, p2_3d = nodes[0].origin_px, nodes[0].origin_3d
        else:
            p2, p2_3d = basal.endpoint_px, basal.endpoint_3d
        return [_Segment(basal.origin_px, p2, basal.origin_3d, p2_3d, basal, "basal_cane", d)]

    # spur and replacement cuts keep the first N nodes of the basal cane
    nodes = _nodes_of(basal)
    if len(nodes) >= N + 1:
        a, b = nodes[N - 1], nodes[N]
        segs = [_Segment(a.origin_px, b.origin_px, a.origin_3d, b.origin_3d, basal, "basal_cane", fraction=0.5)]
    else:
        segs = [
            _Segment(
                basal.origin_px, basal.endpoint_px, basal.origin_3d, basal.endpoint_3d,
                basal, "basal_cane", d * (N + 1), flags=["fallback"],
            )
        ]
    parent = basal.parent
    if not assessment.is_new and parent is not None and parent.organ_class is not OrganClass.MAIN_CORDON:
        segs.append(
            _Segment(basal.origin_px, parent.endpoint_px, basal.origin_3d, parent.endpoint_3d, parent, "parent", d)
        )
    return segs


def _pixel_distance(seg, depth, intrinsics, config):
    D_px = math.dist(seg.p1, seg.p2)
    if seg.fraction is not None:
        return seg.fraction * D_px
    if seg.p1_3d is not None and seg.p2_3d is not None:
        D_m = math.dist(seg.p1_3d, seg.p2_3d)
        if D_m > 0:
            return seg.d_m * D_px / D_m
    if depth is not None and intrinsics is not None:
        try:
            z = estimate_real_depth(seg.p1, depth, window=config.depth_window, max_radius=config.correction_max_radius)
            seg.flags.append("approx_scale")
            return seg.d_m * intrinsics.fx / z
        except DepthError:
            pass
    seg.flags.append("no_metric_scale")
    return seg.d_m * (intrinsics.fx if intrinsics is not None else 1000.0)


def _place(seg, cut, region_id, depth, intrinsics, config):
    flags = list(seg.flags)
    D_px = math.dist(seg.p1, seg.p2)
    if D_px == 0:
        flags.append("degenerate_segment")
        pos, angle = seg.p1, 0.0
    else:
        d_px = _pixel_distance(seg, depth, intrinsics, config)
        flags.extend(f for f in seg.flags if f not in flags)
        if d_px > D_px:
            flags.append("clamped")
        pos = interpolate_pruning_point(seg.p1, seg.p2, d_px)
        angle = orientation_angle(seg.p1, seg.p2)

    corrected = False
    try:
        pos, corrected = correct_onto_organ(pos, seg.target.mask, depth, config.correction_max_radius)
    except CorrectionError as exc:
        log.warning("region %d: %s", region_id, exc)
        flags.append("correction_error")
        pos = (int(round(pos[0])), int(round(pos[1])))

    pos3 = None
    if depth is not None and intrinsics is not None:
        h, w = depth.values.shape
        if 0 <= pos[1] < h and 0 <= pos[0] < w:
            try:
                z = estimate_real_depth(pos, depth, window=config.depth_window, max_radius=config.correction_max_radius)
                pos3 = deproject(pos, z, intrinsics)
            except DepthError:
                pos3 = None
    if pos3 is None and seg.p1_3d is not None and seg.p2_3d is not None and seg.p1_3d != seg.p2_3d:
        t = (seg.fraction if seg.fraction is not None else min(1.0, seg.d_m / math.dist(seg.p1_3d, seg.p2_3d)))
        pos3 = interpolate_pruning_point(seg.p1_3d, seg.p2_3d, t * math.dist(seg.p1_3d, seg.p2_3d))

    return PruningPoint(
        position_px=(int(pos[0]), int(pos[1])),
        position_3d=pos3,
        angle_rad=angle,
        cut=cut,
        region_id=region_id,
        target_item_id=seg.target.id,
        corrected=corrected,
        role=seg.role,
        flags=flags,
    )


def generate_pruning_points(model, assessments, config, depth=None, intrinsics=None):
    """Emit pruning points for every assessed region, in region order."""
    depth = model.depth if depth is None else depth
    intrinsics = model.intrinsics if intrinsics is None else intrinsics
    points = []
    for region, assessment in assessments:
        cut, rule = decide(assessment, config)
        if cut is SKIP:
            continue
        for seg in _segments(cut, region, assessment, config):
            points.append(_place(seg, cut, region.id, depth, intrinsics, config))
    return points

"""Per-region agronomic assessments feeding the cut decision table."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AssessmentError, DepthError, VigorUnknown
from .organs import REGION_CLASSES, OrganClass
from .raster_geometry import deproject, estimate_real_depth


class Location(str, enum.Enum):
    DORSAL = "dorsal"
    VENTRAL = "ventral"
    INTERMEDIATE = "intermediate"


class Growth(str, enum.Enum):
    VERTICAL = "vertical"
    NOT_VERTICAL = "not_vertical"
    UNKNOWN = "unknown"


@dataclass(eq=False)
class PruningRegion:
    item: object
    cordon: object
    basal_cane: object = None

    @property
    def id(self):
        return self.item.id


@dataclass
class RegionAssessment:
    region_id: int
    location: Location
    cane_count: int
    growth: Growth
    vigor_m: float | None
    is_new: bool
    is_replacement: bool
    adjacent_distance_m: float
    basal_cane_id: int | None = None
    flags: list = field(default_factory=list)

    @property
    def has_basal_cane(self):
        return self.basal_cane_id is not None


def location_from_rows(y, d_mc, y_pr, alpha_V, alpha_D):
    """Dorsal/ventral/intermediate band of a cordon cross-section at one column."""
    if y_pr < y + d_mc / 2 * (1 - math.cos(alpha_D / 2)):
        return Location.DORSAL
    if y_pr > y + d_mc - d_mc / 2 * (1 - math.cos(alpha_V / 2)):
        return Location.VENTRAL
    return Location.INTERMEDIATE


def cordon_profile(cordon_mask, x):
    """``(top row, diameter, substituted)`` of the cordon mask at column ``x``.

    An empty column borrows the median diameter of the 5 nearest non-empty
    columns and the top row of the nearest one.
    """
    h, w = cordon_mask.shape
    col = int(min(max(round(x), 0), w - 1))
    column = cordon_mask[:, col]
    if column.any():
        return int(np.argmax(column)), int(column.sum()), False
    filled = np.flatnonzero(cordon_mask.any(axis=0))
    if filled.size == 0:
        raise AssessmentError("cordon mask is empty")
    near = filled[np.lexsort((filled, np.abs(filled - col)))][:5]
    counts = cordon_mask[:, near].sum(axis=0)
    return int(np.argmax(cordon_mask[:, near[0]])), float(np.median(counts)), True


def classify_location(region, cordon, alpha_V, alpha_D):
    item = region.item if isinstance(region, PruningRegion) else region
    x_pr, y_pr = item.origin_px
    y, d_mc, _ = cordon_profile(cordon.mask, x_pr)
    return location_from_rows(y, d_mc, y_pr, alpha_V, alpha_D)


def count_canes(region):
    item = region.item if isinstance(region, PruningRegion) else region
    count = 0
    stack = [item]
    while stack:
        node = stack.pop()
        if node.organ_class is OrganClass.CANE:
            count += 1
        stack.extend(node.children)
    return count


def find_basal_cane(item):
    """The cane nearest its parent in the subtree, ties to the lower ID."""
    if item.organ_class is OrganClass.CANE:
        return item
    canes = [n for n in item.walk() if n.organ_class is OrganClass.CANE]
    if not canes:
        return None
    return min(canes, key=lambda c: (c.distance_from_parent, c.id))


def classify_growth_direction(origin_3d, endpoint_3d, alpha_L, alpha_C):
    if origin_3d is None or endpoint_3d is None:
        return Growth.UNKNOWN
    dy = abs(origin_3d[1] - endpoint_3d[1])
    if dy == 0:
        return Growth.NOT_VERTICAL
    lateral = abs(origin_3d[0] - endpoint_3d[0]) / dy
    cross = abs(origin_3d[2] - endpoint_3d[2]) / dy
    return Growth.VERTICAL if lateral <= alpha_L and cross <= alpha_C else Growth.NOT_VERTICAL


def estimate_vigor(basal_cane, depth, intrinsics, window=2, max_radius=15):
    """Mean metric thickness across the cane, measured row by row.

    Canes wider than tall are measured column by column instead.
    """
    mask = basal_cane.mask if hasattr(basal_cane, "mask") else np.asarray(basal_cane)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise VigorUnknown("empty cane mask")
    r0, c0 = rows[0], cols[0]
    crop = mask[r0 : rows[-1] + 1, c0 : cols[-1] + 1]
    vertical = crop.shape[0] >= crop.shape[1]
    lines = crop if vertical else crop.T
    count, lo, hi, total = kernels.row_extents(lines)

    thicknesses = []
    for k in np.flatnonzero(count):
        mid = total[k] / count[k]
        if vertical:
            row = r0 + k
            centre, p1, p2 = (c0 + mid, row), (c0 + lo[k], row), (c0 + hi[k], row)
        else:
            col = c0 + k
            centre, p1, p2 = (col, r0 + mid), (col, r0 + lo[k]), (col, r0 + hi[k])
        try:
            z = estimate_real_depth(centre, depth, intrinsics, window=window, max_radius=max_radius)
        except DepthError:
            continue
        a = deproject(p1, z, intrinsics)
        b = deproject(p2, z, intrinsics)
        thicknesses.append(math.dist(a, b))
    if not thicknesses:
        raise VigorUnknown("no row of the basal cane has valid depth")
    return float(np.mean(thicknesses))


def classify_origin(region):
    """``(is_new, is_replacement)`` from the parent of the basal cane.

    A region without canes is judged by the region item's own parent.
    """
    if isinstance(region, PruningRegion):
        subject = region.basal_cane or region.item
    else:
        subject = region
    if subject.parent is None:
        raise AssessmentError(f"item {subject.id} has no parent")
    parent_cls = subject.parent.organ_class
    return parent_cls is OrganClass.MAIN_CORDON, parent_cls is OrganClass.ARM


def adjacent_distance(region, regions, metric="max"):
    """Distance to the previous/next region along the cordon, combined by ``metric``.

    Missing neighbours and missing 3D origins count as +inf.
    """
    idx = next(i for i, r in enumerate(regions) if r is region)
    here = region.item.origin_3d
    if here is None:
        return math.inf
    dists = []
    for j in (idx - 1, idx + 1):
        if 0 <= j < len(regions) and regions[j].item.origin_3d is not None:
            dists.append(math.dist(here, regions[j].item.origin_3d))
        else:
            dists.append(math.inf)
    return max(dists) if metric == "max" else min(dists)


def enumerate_regions(model, config=None):
    """Regions per cordon, ordered along the cordon from its root end."""
    side = "left" if config is None else config.root_side
    out = []
    for cordon in sorted(model.roots, key=lambda r: r.id):
        regs = [
            PruningRegion(c, cordon, find_basal_cane(c))
            for c in cordon.children
            if c.organ_class in REGION_CLASSES
        ]
        regs.sort(key=lambda r: (r.item.origin_px[0] if side == "left" else -r.item.origin_px[0], r.id))
        out.append(regs)
    return out


def assess_region(region, regions, depth, intrinsics, config):
    flags = []
    item, basal = region.item, region.basal_cane

    _, _, substituted = cordon_profile(region.cordon.mask, item.origin_px[0])
    if substituted:
        flags.append("cordon_column_substituted")
    location = classify_location(region, region.cordon, config.alpha_V, config.alpha_D)

    growth = Growth.UNKNOWN
    vigor = None
    if basal is not None:
        growth = classify_growth_direction(
            basal.origin_3d, basal.endpoint_3d, config.alpha_L, config.alpha_C
        )
        if growth is Growth.UNKNOWN:
            flags.append("growth_unknown")
        if depth is not None and intrinsics is not None:
            try:
                vigor = estimate_vigor(
                    basal, depth, intrinsics, config.depth_window, config.correction_max_radius
                )
            except VigorUnknown:
                flags.append("vigor_unknown")
        else:
            flags.append("vigor_unknown")

    try:
        is_new, is_replacement = classify_origin(region)
    except AssessmentError:
        is_new = is_replacement = False
        flags.append("orphan_region")

    if item.origin_3d is None:
        flags.append("no_3d_origin")
    adj = adjacent_distance(region, regions, config.adjacency_metric)

    return RegionAssessment(
        region_id=item.id,
        location=location,
        cane_count=count_canes(region),
        growth=growth,
        vigor_m=vigor,
        is_new=is_new,
        is_replacement=is_replacement,
        adjacent_distance_m=adj,
        basal_cane_id=None if basal is None else basal.id,
        flags=flags,
    )


def assess_all(model, depth=None, intrinsics=None, config=None):
    """Assess every pruning region of the model, in cordon order."""
    from .config import PipelineConfig

    config = config or PipelineConfig()
    depth = model.depth if depth is None else depth
    intrinsics = model.intrinsics if intrinsics is None else intrinsics
    out = []
    for regions in enumerate_regions(model, config):
        for region in regions:
            out.append((region, assess_region(region, regions, depth, intrinsics, config)))
    return out

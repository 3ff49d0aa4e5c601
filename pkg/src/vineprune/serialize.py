"""JSON output. Floats are rounded to 6 decimals and +inf is written as null."""

from __future__ import annotations

import enum
import json
import math

import numpy as np

SCHEMA_VERSION = 1


def _clean(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return None
        v = round(v, 6)
        return 0.0 if v == 0 else v
    if isinstance(obj, dict):
        return {(k.value if isinstance(k, enum.Enum) else str(k)): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj):
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _item_dict(item, recurse=True):
    conn = item.connection
    d = {
        "id": item.id,
        "class": item.organ_class,
        "bbox": list(item.bbox),
        "origin_px": item.origin_px,
        "endpoint_px": item.endpoint_px,
        "origin_3d": item.origin_3d,
        "endpoint_3d": item.endpoint_3d,
        "distance_from_parent": item.distance_from_parent,
        "connection": None
        if conn is None
        else {"parent_id": conn.parent_id, "iteration": conn.iteration, "slot": conn.slot, "fallback": conn.fallback},
        "flags": list(item.flags),
    }
    if recurse:
        d["children"] = [_item_dict(c) for c in item.children]
    return d


def model_to_dict(model, assessments=None):
    d = {
        "schema_version": SCHEMA_VERSION,
        "width": model.width,
        "height": model.height,
        "roots": [_item_dict(r) for r in model.roots],
        "orphans": [_item_dict(o) for o in model.orphans],
    }
    if assessments is not None:
        d["regions"] = [assessment_to_dict(a) for _, a in assessments]
    return d


def assessment_to_dict(a):
    return {
        "region_id": a.region_id,
        "location": a.location,
        "cane_count": a.cane_count,
        "growth": a.growth,
        "vigor_m": a.vigor_m,
        "is_new": a.is_new,
        "is_replacement": a.is_replacement,
        "adjacent_distance_m": a.adjacent_distance_m,
        "basal_cane_id": a.basal_cane_id,
        "flags": list(a.flags),
    }


def point_to_dict(p):
    return {
        "position_px": p.position_px,
        "position_3d": p.position_3d,
        "angle_rad": p.angle_rad,
        "cut_type": p.cut,
        "region_id": p.region_id,
        "target_item_id": p.target_item_id,
        "role": p.role,
        "corrected": p.corrected,
        "flags": list(p.flags),
    }


def points_to_dict(points):
    return {"schema_version": SCHEMA_VERSION, "points": [point_to_dict(p) for p in points]}

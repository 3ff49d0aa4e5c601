"""Scene ingestion: COCO polygon annotations, 16-bit depth rasters, intrinsics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .errors import ClassMapError, DimensionError, GeometryError, UsageError
from .organs import OrganClass

log = logging.getLogger(__name__)


def _norm(name):
    return "".join(ch for ch in name.lower() if ch.isalnum())


DEFAULT_CLASS_MAP = {
    "maincordon": OrganClass.MAIN_CORDON,
    "arm": OrganClass.ARM,
    "spur": OrganClass.SPUR,
    "cane": OrganClass.CANE,
    "node": OrganClass.NODE,
}


def resolve_class(name, class_map=None):
    """Map a category name to an :class:`OrganClass` (case/separator insensitive)."""
    table = DEFAULT_CLASS_MAP if class_map is None else {_norm(k): v for k, v in class_map.items()}
    try:
        return OrganClass(table[_norm(name)])
    except KeyError:
        raise ClassMapError(f"category {name!r} does not name an organ class") from None


@dataclass(frozen=True, eq=False)
class InstanceRecord:
    """One organ instance. ``bbox`` is ``(x_min, y_min, x_max, y_max)``, inclusive."""

    instance_id: int
    organ_class: OrganClass
    polygons: tuple
    mask: np.ndarray = field(repr=False)
    bbox: tuple
    source_id: int | None = None

    @classmethod
    def from_polygons(cls, instance_id, organ_class, polygons, height, width, source_id=None):
        rings = []
        mask = np.zeros((height, width), dtype=np.bool_)
        for poly in polygons:
            ring = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
            if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
                ring = ring[:-1]
            if len(ring) < 3:
                raise GeometryError(
                    f"instance {instance_id}: polygon has {len(ring)} vertices, need at least 3"
                )
            rings.append(ring)
            mask |= kernels.rasterize_polygon(ring[:, 0], ring[:, 1], height, width)
        return cls.from_mask(instance_id, organ_class, mask, tuple(rings), source_id)

    @classmethod
    def from_mask(cls, instance_id, organ_class, mask, polygons=(), source_id=None):
        mask = np.asarray(mask, dtype=np.bool_)
        box = mask_bbox(mask)
        if box is None:
            raise GeometryError(f"instance {instance_id}: mask has no pixels inside the image")
        return cls(int(instance_id), OrganClass(organ_class), tuple(polygons), mask, box, source_id)

    @property
    def shape(self):
        return self.mask.shape

    def bbox_mask(self):
        """Filled bounding box as a full-frame mask."""
        out = np.zeros_like(self.mask)
        x0, y0, x1, y1 = self.bbox
        out[y0 : y1 + 1, x0 : x1 + 1] = True
        return out


def mask_bbox(mask):
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return (int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    depth_scale: float = 0.001

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.depth_scale <= 0:
            raise ValueError("depth_scale must be positive")

    @classmethod
    def from_config(cls, config, width, height):
        from .errors import ConfigError

        if config.fx is None or config.fy is None:
            raise ConfigError("fx", "camera focal lengths fx and fy must be set")
        cx = (width - 1) / 2.0 if config.cx is None else config.cx
        cy = (height - 1) / 2.0 if config.cy is None else config.cy
        return cls(config.fx, config.fy, cx, cy, config.depth_scale)


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Raw depth in stored units; 0 marks an invalid pixel."""

    values: np.ndarray = field(repr=False)
    depth_scale: float = 0.001

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def valid(self):
        return self.values > 0

    @property
    def meters(self):
        """Metric depth with invalid pixels as NaN."""
        m = self.values.astype(np.float64) * self.depth_scale
        m[~self.valid] = np.nan
        return m

    @classmethod
    def from_meters(cls, meters, depth_scale=0.001):
        m = np.nan_to_num(np.asarray(meters, dtype=np.float64), nan=0.0)
        raw = np.clip(np.rint(m / depth_scale), 0, np.iinfo(np.uint16).max).astype(np.uint16)
        return cls(raw, depth_scale)


@dataclass
class CocoScene:
    image_id: int
    file_name: str
    width: int
    height: int
    records: list


def _read_json(source):
    if isinstance(source, dict):
        return source
    if isinstance(source, (bytes, bytearray)):
        return json.loads(source.decode("utf-8"))
    if isinstance(source, str):
        return json.loads(source)
    return json.load(source)


def parse_coco(source, class_map=None, image_id=None):
    """Parse one image's polygon annotations from a COCO instance file.

    Instance IDs are the annotation IDs re-mapped to ``0..k-1`` in ascending
    annotation-ID order.
    """
    data = _read_json(source)
    for key in ("images", "annotations", "categories"):
        if not isinstance(data.get(key), list):
            raise UsageError(f"COCO file lacks a {key!r} array")
    images = data["images"]
    if not images:
        raise UsageError("COCO file lists no images")
    if image_id is None:
        if len(images) > 1:
            names = ", ".join(f"{im['id']} ({im.get('file_name', '?')})" for im in images[:10])
            raise UsageError(f"COCO file holds {len(images)} images; select one with image_id: {names}")
        image = images[0]
    else:
        matches = [im for im in images if im["id"] == image_id]
        if not matches:
            raise UsageError(f"image_id {image_id} not present in COCO file")
        image = matches[0]

    categories = {c["id"]: resolve_class(c["name"], class_map) for c in data["categories"]}
    height, width = int(image["height"]), int(image["width"])
    anns = sorted(
        (a for a in data["annotations"] if a.get("image_id", image["id"]) == image["id"]),
        key=lambda a: a["id"],
    )
    records = []
    for dense_id, ann in enumerate(anns):
        if ann["category_id"] not in categories:
            raise ClassMapError(f"annotation {ann['id']}: unknown category_id {ann['category_id']}")
        seg = ann.get("segmentation")
        if isinstance(seg, dict) or ann.get("iscrowd", 0):
            raise UsageError(f"annotation {ann['id']}: RLE masks are not supported, polygons only")
        if not seg:
            raise GeometryError(f"annotation {ann['id']}: empty segmentation")
        records.append(
            InstanceRecord.from_polygons(
                dense_id, categories[ann["category_id"]], seg, height, width, source_id=ann["id"]
            )
        )
    log.debug("parsed %d instances from image %s", len(records), image["id"])
    return CocoScene(image["id"], image.get("file_name", ""), width, height, records)


def parse_annotations(coco_json, class_map=None, image_id=None):
    return parse_coco(coco_json, class_map, image_id).records


def records_to_coco(records, width, height, file_name="scene.png", image_id=0):
    """Serialise records as a single-image COCO dict (polygons as flat lists)."""
    classes = list(OrganClass)
    cats = [{"id": i + 1, "name": c.value, "supercategory": "grapevine"} for i, c in enumerate(classes)]
    anns = []
    for rec in records:
        seg = [[round(float(v), 3) for v in ring.reshape(-1)] for ring in rec.polygons]
        x0, y0, x1, y1 = rec.bbox
        anns.append(
            {
                "id": rec.instance_id + 1,
                "image_id": image_id,
                "category_id": classes.index(rec.organ_class) + 1,
                "segmentation": seg,
                "bbox": [x0, y0, x1 - x0 + 1, y1 - y0 + 1],
                "area": int(rec.mask.sum()),
                "iscrowd": 0,
            }
        )
    return {
        "images": [{"id": image_id, "file_name": file_name, "width": width, "height": height}],
        "annotations": anns,
        "categories": cats,
    }


def load_annotations(path, class_map=None, image_id=None):
    with open(path, "rb") as fh:
        return parse_coco(fh.read(), class_map, image_id)


def load_depth(path, depth_scale=0.001, expected_shape=None):
    """Read a single-channel 16-bit depth raster."""
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I;16L", "I", "L"):
            raise UsageError(f"{path}: depth must be single-channel 16-bit, got mode {im.mode}")
        arr = np.asarray(im)
    if arr.ndim != 2:
        raise UsageError(f"{path}: depth must be single-channel")
    if arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max:
        raise UsageError(f"{path}: depth values exceed the 16-bit range")
    depth = DepthImage(arr.astype(np.uint16), depth_scale)
    if expected_shape is not None:
        check_dimensions(depth, expected_shape)
    return depth


def check_dimensions(depth, shape):
    if (depth.height, depth.width) != tuple(shape):
        raise DimensionError(
            f"depth is {depth.width}x{depth.height} but masks are {shape[1]}x{shape[0]}"
        )


def save_depth(path, depth):
    Image.fromarray(depth.values.astype(np.uint16)).save(path)

import json

import numpy as np
import pytest

from vineprune.config import PipelineConfig
from vineprune.io_ingest import CameraIntrinsics, DepthImage, InstanceRecord, records_to_coco, save_depth
from vineprune.organs import OrganClass
from vineprune.synthetic import CaneSpec, RegionSpec, SceneSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rect(iid, cls, c0, r0, c1, r1, shape=(120, 160)):
    """Filled inclusive rectangle as an InstanceRecord."""
    m = np.zeros(shape, dtype=bool)
    m[r0 : r1 + 1, c0 : c1 + 1] = True
    poly = np.array([[c0, r0], [c1, r0], [c1, r1], [c0, r1]], dtype=np.float64)
    return InstanceRecord.from_mask(iid, OrganClass(cls), m, (poly,))


def uniform_depth(shape, meters=1.0, scale=0.001):
    return DepthImage.from_meters(np.full(shape, meters), scale)


def intrinsics_for(shape, f=1000.0):
    h, w = shape
    return CameraIntrinsics(f, f, (w - 1) / 2.0, (h - 1) / 2.0, 0.001)


def write_scene(out, records, depth, config_text):
    """Write annotations.json, depth.png and config.ini for cmd_run."""
    h, w = records[0].mask.shape
    out.mkdir(parents=True, exist_ok=True)
    (out / "annotations.json").write_text(json.dumps(records_to_coco(records, w, h)))
    save_depth(out / "depth.png", depth)
    (out / "config.ini").write_text(config_text)
    return out / "annotations.json", out / "depth.png", out / "config.ini"


def five_px_cane_spec():
    """Bare 5 px cane on a 1 m plane, fx = 1000."""
    spec = SceneSpec(regions=[RegionSpec("cane", x=300, canes=[CaneSpec(width=5, n_nodes=0)])])
    spec.depth_offsets = {k: 0.0 for k in spec.depth_offsets}
    return spec


@pytest.fixture
def config():
    return PipelineConfig()

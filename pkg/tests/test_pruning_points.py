import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import intrinsics_for, rect, uniform_depth
from vineprune.assessments import Growth, Location, RegionAssessment
from vineprune.config import PipelineConfig
from vineprune.errors import CorrectionError, DegenerateSegment
from vineprune.io_ingest import DepthImage
from vineprune.pipeline import run_pipeline
from vineprune.pruning_points import (
    SKIP,
    CutType,
    correct_onto_organ,
    decide,
    interpolate_pruning_point,
    orientation_angle,
    select_cut,
)
from vineprune.synthetic import SceneSpec, generate_scene

CFG = PipelineConfig()


def assessment(**kw):
    base = dict(
        region_id=1, location=Location.DORSAL, cane_count=1, growth=Growth.VERTICAL, vigor_m=0.01,
        is_new=True, is_replacement=False, adjacent_distance_m=math.inf, basal_cane_id=2,
    )
    base.update(kw)
    return RegionAssessment(**base)


def test_select_cut_examples():
    assert select_cut(assessment(), CFG) is CutType.SPUR_CUT
    min_cfg = PipelineConfig(adjacency_metric="min")
    assert select_cut(assessment(adjacent_distance_m=0.03), min_cfg) is CutType.CLEAN_CUT
    a = assessment(is_new=False, is_replacement=True)
    assert select_cut(a, CFG) is CutType.REPLACEMENT_CUT


def test_select_cut_other_rows():
    assert select_cut(assessment(location=Location.VENTRAL), CFG) is CutType.BASE_BUD_CUT
    assert select_cut(assessment(is_new=False, growth=Growth.NOT_VERTICAL), CFG) is CutType.BASE_BUD_CUT
    assert select_cut(assessment(is_new=False, vigor_m=0.02), CFG) is CutType.BASE_BUD_CUT
    bare = assessment(is_new=False, cane_count=0, basal_cane_id=None, growth=Growth.UNKNOWN, vigor_m=None)
    assert select_cut(bare, CFG) is SKIP
    unsure = assessment(is_new=False, growth=Growth.UNKNOWN, vigor_m=None)
    assert decide(unsure, CFG) == (CutType.SPUR_CUT, "default_spur")


def table_oracle(a, c):
    """The decision table written out as plain if/else."""
    has_basal = a.basal_cane_id is not None
    in_range = a.vigor_m is not None and c.vigor_min <= a.vigor_m <= c.vigor_max
    out_range = a.vigor_m is not None and not in_range
    if a.is_new and a.adjacent_distance_m < c.adjacency_min:
        return CutType.CLEAN_CUT
    if a.is_new and a.location is Location.VENTRAL:
        return CutType.BASE_BUD_CUT
    if a.is_replacement and has_basal:
        return CutType.REPLACEMENT_CUT
    if has_basal and a.growth is Growth.VERTICAL and in_range:
        return CutType.SPUR_CUT
    if has_basal and (a.growth is Growth.NOT_VERTICAL or out_range):
        return CutType.BASE_BUD_CUT
    if a.cane_count == 0:
        return None
    return CutType.SPUR_CUT


assessments = st.builds(
    RegionAssessment,
    region_id=st.integers(0, 50),
    location=st.sampled_from(list(Location)),
    cane_count=st.integers(0, 4),
    growth=st.sampled_from(list(Growth)),
    vigor_m=st.one_of(st.none(), st.floats(0, 0.03)),
    is_new=st.booleans(),
    is_replacement=st.booleans(),
    adjacent_distance_m=st.one_of(st.just(math.inf), st.floats(0, 0.5)),
    basal_cane_id=st.one_of(st.none(), st.integers(0, 50)),
)


@given(assessments)
def test_select_cut_total_and_matches_table(a):
    out = select_cut(a, CFG)
    assert out is None or isinstance(out, CutType)
    assert out is table_oracle(a, CFG)


def test_interpolation_examples():
    p1, p2 = (0.0, 0.0, 1.0), (0.0, 0.10, 1.0)
    assert interpolate_pruning_point(p1, p2, 0.0) == p1
    pp = interpolate_pruning_point(p1, p2, 0.02)
    assert pp == pytest.approx((0.0, 0.02, 1.0), abs=1e-15)
    mid = interpolate_pruning_point((1.0, 2.0, 3.0), (3.0, 6.0, 5.0), math.dist((1, 2, 3), (3, 6, 5)) / 2)
    assert mid == pytest.approx((2.0, 4.0, 4.0))
    with pytest.raises(DegenerateSegment):
        interpolate_pruning_point(p1, p1, 0.0)


pt = st.tuples(*[st.floats(-5, 5)] * 3)


@given(pt, pt, st.floats(0, 1))
def test_interpolation_properties(p1, p2, frac):
    D = math.dist(p1, p2)
    if D < 1e-6:
        return
    assert interpolate_pruning_point(p1, p2, 0.0) == p1
    assert interpolate_pruning_point(p1, p2, D) == p2
    pp = interpolate_pruning_point(p1, p2, frac * D)
    assert abs(math.dist(pp, p1) - frac * D) <= 1e-9
    assert abs(math.dist(pp, p1) + math.dist(pp, p2) - D) <= 1e-9


def test_orientation_examples():
    assert orientation_angle((5, 0), (5, 9)) == 0.0
    assert orientation_angle((0, 4), (7, 4)) == math.pi / 2
    assert orientation_angle((1, 1), (0, 0)) == pytest.approx(math.pi / 4 - math.pi / 2)
    with pytest.raises(DegenerateSegment):
        orientation_angle((2, 2), (2, 2))


pix = st.tuples(st.integers(0, 4000), st.integers(0, 3000))


@given(pix, pix)
def test_orientation_perpendicular_and_swap_invariant(a, b):
    if a == b:
        return
    alpha = orientation_angle(a, b)
    dx, dy = a[0] - b[0], a[1] - b[1]
    assert abs(math.cos(alpha) * dx + math.sin(alpha) * dy) <= 1e-9
    assert orientation_angle(b, a) == alpha


def vertical_cane(shape=(40, 40)):
    m = np.zeros(shape, bool)
    m[5:35, 10:15] = True
    return m


def test_correction_identity_on_mask():
    assert correct_onto_organ((12, 20), vertical_cane()) == ((12, 20), False)


def test_correction_moves_onto_mask():
    assert correct_onto_organ((7, 20), vertical_cane()) == ((10, 20), True)
    assert correct_onto_organ((18, 20), vertical_cane()) == ((14, 20), True)
    # x is scanned before y
    assert correct_onto_organ((12, 37), vertical_cane()) == ((12, 34), True)


def test_correction_falls_back_to_depth():
    m = vertical_cane()
    vals = np.zeros(m.shape, np.uint16)
    vals[20, 33] = 1000
    assert correct_onto_organ((30, 20), m, DepthImage(vals), max_radius=5) == ((33, 20), True)


def test_correction_error_in_depth_hole():
    m = vertical_cane()
    with pytest.raises(CorrectionError):
        correct_onto_organ((35, 20), m, DepthImage(np.zeros(m.shape, np.uint16)), max_radius=10)


SHAPE = (160, 160)


def noded_cane(node_rows):
    recs = [rect(0, "main_cordon", 0, 120, 159, 139, SHAPE), rect(1, "cane", 50, 40, 59, 121, SHAPE)]
    recs += [rect(2 + i, "node", 51, y - 2, 58, y + 2, SHAPE) for i, y in enumerate(node_rows)]
    return run_pipeline(recs, uniform_depth(SHAPE), intrinsics_for(SHAPE), CFG)


def test_spur_cut_between_second_and_third_node():
    res = noded_cane([60, 100, 80])
    ((_, a),) = res.assessments
    assert a.is_new and select_cut(a, CFG) is CutType.SPUR_CUT
    (p,) = res.points
    assert p.cut is CutType.SPUR_CUT
    assert p.position_px[1] == pytest.approx(70, abs=0.5)
    assert p.angle_rad == 0.0
    assert "fallback" not in p.flags


def test_spur_cut_fallback_with_one_node():
    (p,) = noded_cane([100]).points
    assert "fallback" in p.flags
    origin_row = 120.5
    d_px = CFG.cut_offset_d * (CFG.spur_nodes_N + 1) * 1000.0
    assert p.position_px[1] == pytest.approx(origin_row - d_px, abs=1.0)


def test_scene_points_one_per_spur_on_mask():
    b = generate_scene(SceneSpec.uniform())
    res = run_pipeline(b.records, b.depth, b.intrinsics, CFG)
    spurs = [it for it in res.model.items.values() if it.organ_class.value == "spur"]
    for s in spurs:
        assert sum(p.target_item_id == s.id for p in res.points) == 1
    for p in res.points:
        c, r = p.position_px
        assert res.model.items[p.target_item_id].mask[r, c]
        assert "correction_error" not in p.flags


def test_missing_depth_flags_scale():
    b = generate_scene(SceneSpec.uniform(n_spurs=1, nodes_per_cane=1))
    res = run_pipeline(b.records, None, None, CFG)
    flags = {f for p in res.points for f in p.flags}
    assert "no_metric_scale" in flags
    assert all(p.position_3d is None for p in res.points)

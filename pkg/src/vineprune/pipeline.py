"""Model -> assessments -> pruning points, as one call."""

from __future__ import annotations

from dataclasses import dataclass

from .assessments import assess_all
from .plant_model import assemble_model
from .pruning_points import WARNING_FLAGS, generate_pruning_points


@dataclass
class PipelineResult:
    model: object
    assessments: list
    points: list

    def warnings(self):
        """Human-readable list of conditions that make a run degraded."""
        out = [f"point {i} (region {p.region_id}): {f}" for i, p in enumerate(self.points) for f in p.flags if f in WARNING_FLAGS]
        out += [f"region {a.region_id}: {f}" for _, a in self.assessments for f in a.flags if f in REGION_WARNING_FLAGS]
        out += [f"item {it.id} ({it.organ_class.value}) is unconnected" for it in self.model.orphans]
        return out


REGION_WARNING_FLAGS = frozenset({"orphan_region", "vigor_unknown", "no_3d_origin"})


def run_pipeline(records, depth, intrinsics, config):
    model = assemble_model(records, depth, intrinsics, config)
    assessments = assess_all(model, depth, intrinsics, config)
    points = generate_pruning_points(model, assessments, config, depth, intrinsics)
    return PipelineResult(model, assessments, points)

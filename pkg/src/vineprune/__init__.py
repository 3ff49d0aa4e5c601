"""Grapevine plant modelling and spur-pruning point generation from instance masks."""

from .assessments import Growth, Location, RegionAssessment, assess_all
from .config import PipelineConfig, load_config, parse_config
from .errors import *  # noqa: F401,F403
from .io_ingest import (
    CameraIntrinsics,
    DepthImage,
    InstanceRecord,
    load_annotations,
    load_depth,
    parse_annotations,
)
from .organs import OrganClass
from .pipeline import PipelineResult, run_pipeline
from .plant_model import GrapevineItem, PlantModel, assemble_model
from .pruning_points import CutType, PruningPoint, generate_pruning_points

__version__ = "0.1.0"

"""Liquid container geometry, pouring groundtruth and evaluation metrics."""
from ._accel import USE_NUMBA
from .geometry import (
    DegenerateCap,
    InvertedOrientation,
    NonWatertight,
    Plane,
    Rotation,
    TriangleMesh,
    clip_mesh_below,
    clip_volume_below,
    mesh_volume,
    validate_mesh,
)
from .labels import ComparativeLabel, ContentClass, FractionClass, volume_bin
from .pouring import (
    ContainerModel,
    PourSequence,
    TiltQuery,
    fill_surface_height,
    lip_height,
    max_stable_volume,
    remaining_volume,
    rescale_to_volume,
    simulate_pour,
)

__version__ = "0.1.0"

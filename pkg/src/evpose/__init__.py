"""Event-camera human pose pipeline: rasterized event point clouds, Sobel
edge enhancement, slice-token temporal modeling, a toy point-cloud backbone,
two-view triangulation and MPJPE."""

__version__ = "0.1.0"

from .edges import EdgeParams, enhance, enhance_cloud, sobel_gradients
from .events import EventStream, TimeWindow, parse_events, serialize_events, synth_events, window_iter
from .geometry import CameraModel, Pose3D, mpjpe_2d, mpjpe_3d, project, triangulate
from .micronet import MicroNetParams, Pose2D, SimdrLogits, forward, simdr_decode
from .raster import RasterCloud, VoxelGrid, rasterize, sample_points, to_point_cloud
from .temporal import EtscParams, es_seq, etsc_forward, fuse, slice_assign, temporal_global

__all__ = [
    "CameraModel", "EdgeParams", "EtscParams", "EventStream", "MicroNetParams", "Pose2D",
    "Pose3D", "RasterCloud", "SimdrLogits", "TimeWindow", "VoxelGrid", "enhance",
    "enhance_cloud", "es_seq", "etsc_forward", "forward", "fuse", "mpjpe_2d", "mpjpe_3d",
    "parse_events", "project", "rasterize", "sample_points", "serialize_events",
    "simdr_decode", "slice_assign", "sobel_gradients", "synth_events", "temporal_global",
    "to_point_cloud", "triangulate", "window_iter",
]

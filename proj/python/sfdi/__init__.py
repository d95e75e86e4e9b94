"""Spatial frequency domain imaging: fringe simulation, phase tracking, optical property recovery."""

from ._sfdi import (
    DiffusionLut,
    SfdiError,
    asge_check,
    build_lut,
    demodulate_pixel,
    diffuse_reflectance,
    read_property_map,
    read_stack,
    recover_properties,
    render_fringe_video,
    run,
    select_triplet,
    spatial_frequency,
    time_to_three_frames,
    usable_frame_rate,
    write_stack,
)

__all__ = [
    "DiffusionLut",
    "SfdiError",
    "asge_check",
    "build_lut",
    "demodulate_pixel",
    "diffuse_reflectance",
    "read_property_map",
    "read_stack",
    "recover_properties",
    "render_fringe_video",
    "run",
    "select_triplet",
    "spatial_frequency",
    "time_to_three_frames",
    "usable_frame_rate",
    "write_stack",
]

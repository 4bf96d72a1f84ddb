"""Result files: JSON/CSV writers, SVG renders and the run manifest."""

from .files import (
    figure_frames,
    read_csv,
    read_json,
    sweep_frame,
    write_bands,
    write_csv,
    write_density_map,
    write_figure_csvs,
    write_json,
    write_sweep,
    write_table,
)
from .manifest import RunManifest, code_version, write_manifest
from .svg import Series, heatmap, line_chart, series_by_depth, write_svg

__all__ = [
    "RunManifest",
    "Series",
    "code_version",
    "figure_frames",
    "heatmap",
    "line_chart",
    "read_csv",
    "read_json",
    "series_by_depth",
    "sweep_frame",
    "write_bands",
    "write_csv",
    "write_density_map",
    "write_figure_csvs",
    "write_json",
    "write_manifest",
    "write_sweep",
    "write_table",
]

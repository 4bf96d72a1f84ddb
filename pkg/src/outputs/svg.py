from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

WIDTH = 640
HEIGHT = 440
MARGIN = (70, 30, 30, 60)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    error: Optional[Sequence[float]] = None


def _root(width: int = WIDTH, height: int = HEIGHT) -> ET.Element:
    root = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        version="1.1",
        width=f"{width}px",
        height=f"{height}px",
        viewBox=f"0 0 {width} {height}",
    )
    ET.SubElement(root, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    return root


def _text(parent: ET.Element, x: float, y: float, text: str, anchor: str = "middle", size: int = 12, **extra: str) -> ET.Element:
    node = ET.SubElement(
        parent, "text", x=f"{x:.2f}", y=f"{y:.2f}", attrib={"text-anchor": anchor, "font-size": str(size), "font-family": "sans-serif", **extra}
    )
    node.text = text
    return node


def _range(values: np.ndarray) -> Tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    low, high = float(finite.min()), float(finite.max())
    if high - low < 1e-300:
        pad = abs(low) * 0.1 or 1.0
        return low - pad, high + pad
    pad = 0.05 * (high - low)
    return low - pad, high + pad


def _ticks(low: float, high: float, count: int = 5) -> np.ndarray:
    step = (high - low) / count
    magnitude = 10.0 ** np.floor(np.log10(step))
    for factor in (1.0, 2.0, 2.5, 5.0, 10.0):
        if step <= factor * magnitude:
            step = factor * magnitude
            break
    first = np.ceil(low / step) * step
    return np.arange(first, high + step * 1e-9, step)


def _label(value: float) -> str:
    return f"{value:.3g}"


class _Frame:
    """Maps data coordinates onto the plot rectangle."""

    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float], width: int, height: int) -> None:
        left, right, top, bottom = MARGIN
        self.x0, self.x1 = left, width - right
        self.y0, self.y1 = height - bottom, top
        self.x_range = x_range
        self.y_range = y_range

    def x(self, value: float) -> float:
        lo, hi = self.x_range
        return self.x0 + (value - lo) / (hi - lo) * (self.x1 - self.x0)

    def y(self, value: float) -> float:
        lo, hi = self.y_range
        return self.y0 + (value - lo) / (hi - lo) * (self.y1 - self.y0)


def _axes(root: ET.Element, frame: _Frame, title: str, x_label: str, y_label: str) -> None:
    group = ET.SubElement(root, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(group, "path", d=f"M{frame.x0} {frame.y1}L{frame.x0} {frame.y0}L{frame.x1} {frame.y0}", fill="none")
    labels = ET.SubElement(root, "g")
    for tick in _ticks(*frame.x_range):
        x = frame.x(tick)
        ET.SubElement(group, "line", x1=f"{x:.2f}", y1=str(frame.y0), x2=f"{x:.2f}", y2=str(frame.y0 + 5))
        _text(labels, x, frame.y0 + 18, _label(tick))
    for tick in _ticks(*frame.y_range):
        y = frame.y(tick)
        ET.SubElement(group, "line", x1=str(frame.x0 - 5), y1=f"{y:.2f}", x2=str(frame.x0), y2=f"{y:.2f}")
        _text(labels, frame.x0 - 8, y + 4, _label(tick), anchor="end")
    _text(labels, (frame.x0 + frame.x1) / 2, frame.y0 + 40, x_label, size=13)
    y_mid = (frame.y0 + frame.y1) / 2
    _text(labels, 16, y_mid, y_label, size=13, transform=f"rotate(-90 16 {y_mid:.2f})")
    _text(labels, (frame.x0 + frame.x1) / 2, frame.y1 - 10, title, size=14)


def line_chart(
    series: Sequence[Series],
    title: str,
    x_label: str,
    y_label: str,
    *,
    width: int = WIDTH,
    height: int = HEIGHT,
) -> ET.Element:
    """Polyline per series with markers, optional error bars and a legend."""
    if series:
        xs = np.concatenate([np.asarray(s.x, dtype=np.float64) for s in series])
        ys = np.concatenate(
            [np.asarray(s.y, dtype=np.float64) + (np.asarray(s.error) if s.error is not None else 0.0) for s in series]
            + [np.asarray(s.y, dtype=np.float64) - (np.asarray(s.error) if s.error is not None else 0.0) for s in series]
        )
    else:
        xs, ys = np.zeros(0), np.zeros(0)
    root = _root(width, height)
    frame = _Frame(_range(xs), _range(ys), width, height)
    _axes(root, frame, title, x_label, y_label)

    legend = ET.SubElement(root, "g")
    for index, entry in enumerate(series):
        colour = PALETTE[index % len(PALETTE)]
        group = ET.SubElement(root, "g", stroke=colour, fill=colour)
        points = [(frame.x(x), frame.y(y)) for x, y in zip(entry.x, entry.y) if np.isfinite(y)]
        if points:
            path = "M" + "L".join(f"{x:.2f} {y:.2f}" for x, y in points)
            ET.SubElement(group, "path", d=path, fill="none", attrib={"stroke-width": "1.5"})
        for x, y in points:
            ET.SubElement(group, "circle", cx=f"{x:.2f}", cy=f"{y:.2f}", r="2.5")
        if entry.error is not None:
            for x, y, err in zip(entry.x, entry.y, entry.error):
                ET.SubElement(
                    group, "line", x1=f"{frame.x(x):.2f}", y1=f"{frame.y(y - err):.2f}", x2=f"{frame.x(x):.2f}", y2=f"{frame.y(y + err):.2f}"
                )
        row_y = frame.y1 + 14 + 16 * index
        ET.SubElement(legend, "rect", x=str(frame.x1 - 110), y=f"{row_y - 9}", width="10", height="10", fill=colour)
        _text(legend, frame.x1 - 95, row_y, entry.label, anchor="start", size=11)
    return root


def _diverging(value: float, limit: float) -> str:
    """Blue for negative, white at zero, red for positive."""
    t = 0.0 if limit <= 0 else max(-1.0, min(1.0, value / limit))
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(
    x: Sequence[float],
    y: Sequence[float],
    values: Sequence[float],
    title: str,
    x_label: str,
    y_label: str,
    *,
    width: int = WIDTH,
    height: int = HEIGHT,
) -> ET.Element:
    """Scattered site values as squares on a colour scale symmetric about zero."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    vs = np.asarray(values, dtype=np.float64)
    root = _root(width, height)
    frame = _Frame(_range(xs), _range(ys), width, height)
    limit = float(np.max(np.abs(vs))) if vs.size else 0.0
    cells = ET.SubElement(root, "g", stroke="none")
    if xs.size:
        unique_x = np.unique(np.round(xs, 9))
        spacing = float(np.min(np.diff(unique_x))) if unique_x.size > 1 else 1.0
        size = max(1.0, abs(frame.x(frame.x_range[0] + spacing) - frame.x0))
        for order in np.argsort(np.abs(vs), kind="stable"):
            cx, cy = frame.x(xs[order]), frame.y(ys[order])
            ET.SubElement(
                cells,
                "rect",
                x=f"{cx - size / 2:.2f}",
                y=f"{cy - size / 2:.2f}",
                width=f"{size:.2f}",
                height=f"{size:.2f}",
                fill=_diverging(float(vs[order]), limit),
            )
    _axes(root, frame, title, x_label, y_label)
    scale = ET.SubElement(root, "g")
    _text(scale, frame.x1, frame.y1 - 10, f"|max| = {limit:.3g}", anchor="end", size=11)
    return root


def write_svg(path: PathLike, root: ET.Element) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    ET.ElementTree(root).write(file_path, encoding="utf-8", xml_declaration=True)
    logger.debug("SVG written to %s", file_path)
    return file_path


def series_by_depth(frame: pd.DataFrame, x_column: str, y_column: str, error_column: Optional[str] = None) -> List[Series]:
    """One series per depth from a pandas frame with a ``depth`` column."""
    series: List[Series] = []
    for depth, group in frame.groupby("depth", sort=True):
        ordered = group.sort_values(x_column)
        series.append(
            Series(
                label=f"{depth:.2f} nm",
                x=ordered[x_column].to_numpy(),
                y=ordered[y_column].to_numpy(),
                error=None if error_column is None else ordered[error_column].to_numpy(),
            )
        )
    return series


__all__ = ["Series", "heatmap", "line_chart", "series_by_depth", "write_svg"]

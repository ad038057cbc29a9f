"""
SVG serialization of sketches.

Each visible stroke becomes one `<path d="M .. C ..">` element drawn in black
over a white `<rect>`. Coordinates are written in pixels of the sketch canvas.
"""
import xml.etree.ElementTree as ET
from typing import List, Optional

from svgpathtools import CubicBezier, parse_path

from scenesketch.core.errors import DomainError, SvgParseError
from scenesketch.core.logging import logger
from scenesketch.schemas import Region
from scenesketch.sketch.model import Sketch, Stroke

SVG_NS = "http://www.w3.org/2000/svg"
DEFAULT_DROP_THRESHOLD = 0.1


def _fmt(value: float) -> str:
    text = format(value, ".6f").rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def _path_data(stroke: Stroke, canvas: int) -> str:
    (x0, y0), (x1, y1), (x2, y2), (x3, y3) = [(x * canvas, y * canvas) for x, y in stroke.control_points]
    return (
        f"M {_fmt(x0)} {_fmt(y0)} "
        f"C {_fmt(x1)} {_fmt(y1)}, {_fmt(x2)} {_fmt(y2)}, {_fmt(x3)} {_fmt(y3)}"
    )


def export_svg(sketch: Sketch, drop_threshold: float = DEFAULT_DROP_THRESHOLD) -> str:
    """
    Serialize the strokes whose probability reaches drop_threshold.

    Args:
        sketch: sketch to write
        drop_threshold: strokes with p below this are physically removed

    Returns:
        SVG 1.1 document text
    """
    if not 0.0 <= drop_threshold < 1.0:
        raise DomainError(f"drop_threshold must lie in [0, 1), got {drop_threshold}")
    size = str(sketch.canvas_size)
    root = ET.Element("svg", {
        "xmlns": SVG_NS,
        "version": "1.1",
        "width": size,
        "height": size,
        "viewBox": f"0 0 {size} {size}",
    })
    ET.SubElement(root, "rect", {"width": size, "height": size, "fill": "white"})
    for stroke in sketch.strokes:
        if stroke.probability < drop_threshold:
            continue
        ET.SubElement(root, "path", {
            "d": _path_data(stroke, sketch.canvas_size),
            "stroke": "black",
            "fill": "none",
            "stroke-width": _fmt(stroke.effective_width),
            "stroke-linecap": "round",
            "class": stroke.region.value,
        })
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_size(value: Optional[str], fallback: int) -> int:
    if not value:
        return fallback
    return int(round(float(value.strip().removesuffix("px"))))


def import_svg(document: str, canvas_size: Optional[int] = None) -> Sketch:
    """
    Rebuild a sketch from export_svg output (or any single-cubic-per-path SVG).

    Every visible path becomes a stroke with p = 1 and the written stroke-width.
    A zero-width path (a hidden stroke exported at threshold 0) comes back with
    p = 0, so re-exporting writes it unchanged.

    Raises:
        SvgParseError: malformed XML, or a path that is not exactly one cubic segment
    """
    if not document.strip():
        return Sketch(strokes=(), canvas_size=canvas_size or 224)
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise SvgParseError(f"malformed SVG document: {e}")

    size = canvas_size or _parse_size(root.get("width"), 224)
    strokes: List[Stroke] = []
    paths = [el for el in root.iter() if _local(el.tag) == "path"]
    for index, el in enumerate(paths):
        d = el.get("d")
        if not d:
            raise SvgParseError("missing 'd' attribute", path_index=index)
        try:
            path = parse_path(d)
        except Exception as e:
            raise SvgParseError(f"unparseable path data '{d}': {e}", path_index=index)
        if len(path) != 1 or not isinstance(path[0], CubicBezier):
            kinds = ", ".join(type(seg).__name__ for seg in path) or "no segments"
            raise SvgParseError(f"expected a single cubic segment, found {kinds}", path_index=index)
        try:
            width = float(el.get("stroke-width", "1"))
        except ValueError:
            raise SvgParseError(f"bad stroke-width '{el.get('stroke-width')}'", path_index=index)
        if width < 0:
            raise SvgParseError(f"negative stroke-width {width:g}", path_index=index)
        seg = path[0]
        points = tuple(
            (c.real / size, c.imag / size) for c in (seg.start, seg.control1, seg.control2, seg.end)
        )
        region_attr = el.get("class", Region.background.value)
        region = Region.foreground if region_attr == Region.foreground.value else Region.background
        if width == 0:
            # Hidden stroke written at threshold 0; its base width is not recoverable
            logger.debug(f"Path {index} has zero width, imported with p = 0")
            strokes.append(Stroke(control_points=points, probability=0.0, region=region))
        else:
            strokes.append(Stroke(control_points=points, width=width, probability=1.0, region=region))

    regions = {s.region for s in strokes}
    region = regions.pop() if len(regions) == 1 else (Region.combined if regions else Region.background)
    return Sketch(strokes=tuple(strokes), canvas_size=size, region=region)

"""Vector sketch representation and SVG serialization."""
from scenesketch.sketch.model import (
    CanvasTransform,
    Sketch,
    Stroke,
    apply_transform,
    bezier_points,
    combine_sketches,
    de_casteljau,
    evaluate_bezier,
    resize_canvas,
    sketch_from_tensors,
    sketch_to_tensors,
)
from scenesketch.sketch.svg import DEFAULT_DROP_THRESHOLD, export_svg, import_svg

__all__ = [
    "CanvasTransform",
    "Sketch",
    "Stroke",
    "apply_transform",
    "bezier_points",
    "combine_sketches",
    "de_casteljau",
    "evaluate_bezier",
    "resize_canvas",
    "sketch_from_tensors",
    "sketch_to_tensors",
    "DEFAULT_DROP_THRESHOLD",
    "export_svg",
    "import_svg",
]

"""Scene decomposition, saliency, inpainting and stroke initialization."""
from scenesketch.scene.decompose import SceneDecomposition, count_objects, decompose, rescale_object
from scenesketch.scene.init import init_strokes
from scenesketch.scene.inpaint import Inpainter, LamaInpainter, TeleaInpainter, get_inpainter
from scenesketch.scene.saliency import LuminanceSaliency, Saliency, U2NetSaliency, get_saliency

__all__ = [
    "SceneDecomposition",
    "count_objects",
    "decompose",
    "rescale_object",
    "init_strokes",
    "Inpainter",
    "LamaInpainter",
    "TeleaInpainter",
    "get_inpainter",
    "LuminanceSaliency",
    "Saliency",
    "U2NetSaliency",
    "get_saliency",
]

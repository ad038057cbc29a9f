"""Fidelity and recognizability metrics for abstraction matrices."""
from scenesketch.evaluation.ms_ssim import ms_ssim
from scenesketch.evaluation.recognizability import ZeroShotClassifier, recognizability, top_k_classes
from scenesketch.evaluation.xdog import XDoGParams, xdog_edges

__all__ = ["ms_ssim", "ZeroShotClassifier", "recognizability", "top_k_classes", "XDoGParams", "xdog_edges"]

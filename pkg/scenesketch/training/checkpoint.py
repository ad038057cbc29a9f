"""
Network checkpoints.

A checkpoint is a torch.save archive holding a versioned header (format
version, network kind, seed, stroke count, hidden width) and the state dict.
"""
from pathlib import Path
from typing import Union

import torch

from scenesketch.core.errors import MissingArtifactError
from scenesketch.core.logging import logger
from scenesketch.training.networks import LocNet, SimpNet

FORMAT_VERSION = 1
_KINDS = {"loc": LocNet, "simp": SimpNet}


def save_checkpoint(path: Union[str, Path], net: Union[LocNet, SimpNet]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind = "loc" if isinstance(net, LocNet) else "simp"
    torch.save({
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "seed": net.seed,
        "n": net.n_strokes,
        "h": net.hidden_width,
        "state_dict": {k: v.detach().cpu() for k, v in net.state_dict().items()},
    }, path)
    logger.debug(f"Saved {kind} checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Union[LocNet, SimpNet]:
    """
    Rebuild a network from a checkpoint file.

    Raises:
        MissingArtifactError: file missing, or header unreadable / from another format version
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise MissingArtifactError(f"unsupported checkpoint format in {path}")
    kind = payload.get("kind")
    if kind not in _KINDS:
        raise MissingArtifactError(f"unknown checkpoint kind '{kind}' in {path}")
    net = _KINDS[kind](payload["n"], hidden_width=payload["h"], seed=payload["seed"])
    state = payload["state_dict"]
    net.to(next(iter(state.values())).dtype)
    net.load_state_dict(state)
    return net

"""
Paired random perspective + resized-crop augmentation.

One parameter draw is applied to the rendered sketch and to the target so the
perceptual loss compares like with like. All sampling goes through the
lineage's torch.Generator.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
from torchvision.transforms import InterpolationMode
from torchvision.transforms import functional as TF

from scenesketch.encoders.base import as_batch

Corner = Tuple[int, int]


@dataclass(frozen=True)
class AugmentParams:
    """One sampled view: perspective corners plus a square crop (top, left, size)."""
    startpoints: Tuple[Corner, ...]
    endpoints: Tuple[Corner, ...]
    crop: Tuple[int, int, int]

    @property
    def has_perspective(self) -> bool:
        return self.startpoints != self.endpoints


def _randint(low: int, high: int, gen: torch.Generator) -> int:
    """Integer in [low, high)."""
    if high <= low:
        return low
    return int(torch.randint(low, high, (1,), generator=gen).item())


class PairedAugmenter:
    """
    Samples views and applies them identically to a sketch render and its target.

    Args:
        distortion: perspective distortion scale in [0, 1]
        crop_scale: (low, high) fraction of the image area kept by the crop
        views: augmented views per loss evaluation
        generator: source of randomness; a fresh unseeded one if None
    """

    def __init__(
        self,
        distortion: float = 0.3,
        crop_scale: Tuple[float, float] = (0.8, 1.0),
        views: int = 4,
        generator: Optional[torch.Generator] = None,
    ):
        self.distortion = distortion
        self.crop_scale = crop_scale
        self.views = views
        self.generator = generator if generator is not None else torch.Generator()

    def sample(self, size: int) -> AugmentParams:
        gen = self.generator
        half = size // 2
        reach = int(self.distortion * half) + 1
        last = size - 1
        start = ((0, 0), (last, 0), (last, last), (0, last))
        end = (
            (_randint(0, reach, gen), _randint(0, reach, gen)),
            (last - _randint(0, reach, gen), _randint(0, reach, gen)),
            (last - _randint(0, reach, gen), last - _randint(0, reach, gen)),
            (_randint(0, reach, gen), last - _randint(0, reach, gen)),
        )
        low, high = self.crop_scale
        u = float(torch.rand(1, generator=gen).item())
        area = (low + (high - low) * u) * size * size
        side = max(1, min(size, int(round(area ** 0.5))))
        top = _randint(0, size - side + 1, gen)
        left = _randint(0, size - side + 1, gen)
        return AugmentParams(startpoints=start, endpoints=end, crop=(top, left, side))

    @staticmethod
    def apply(image: torch.Tensor, params: AugmentParams) -> torch.Tensor:
        """Apply one view to a (B, 3, H, W) batch; white fills the uncovered border."""
        size = int(image.shape[-1])
        out = image
        if params.has_perspective:
            out = TF.perspective(
                out,
                [list(p) for p in params.startpoints],
                [list(p) for p in params.endpoints],
                interpolation=InterpolationMode.BILINEAR,
                fill=[1.0, 1.0, 1.0],
            )
        top, left, side = params.crop
        if side != size or top or left:
            out = TF.resized_crop(
                out, top, left, side, side, [size, size],
                interpolation=InterpolationMode.BILINEAR, antialias=True,
            )
        return out

    def sample_views(self, size: int) -> List[AugmentParams]:
        return [self.sample(size) for _ in range(self.views)]

    def __call__(self, sketch: torch.Tensor, target: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Returns:
            (sketch views, target views), each (views, 3, H, W)
        """
        s = as_batch(sketch)
        t = as_batch(target).to(s.dtype)
        params = self.sample_views(int(s.shape[-1]))
        sketches = torch.cat([self.apply(s, p) for p in params], dim=0)
        targets = torch.cat([self.apply(t, p) for p in params], dim=0)
        return sketches, targets

"""Image view pipeline: deterministic original view + random resized crops.

The original view is resize-shorter-side then center-crop (no randomness);
augmented views use the standard random-resized-crop recipe: area fraction
uniform in [0.08, 1.0], log-uniform aspect in [3/4, 4/3], ten proposals
then a center fallback.
"""

import math

import numpy as np
from PIL import Image

RESAMPLE = Image.Resampling.BILINEAR


def original_view(img: Image.Image, size: int) -> Image.Image:
    w, h = img.size
    scale = size / min(w, h)
    resized = img.resize((max(size, round(w * scale)), max(size, round(h * scale))), RESAMPLE)
    return _center_crop(resized, size)


def random_resized_crop(
    img: Image.Image,
    rng: np.random.Generator,
    size: int,
    scale: tuple[float, float] = (0.08, 1.0),
    ratio: tuple[float, float] = (3 / 4, 4 / 3),
) -> Image.Image:
    w, h = img.size
    area = w * h
    log_ratio = (math.log(ratio[0]), math.log(ratio[1]))
    for _ in range(10):
        target_area = area * float(rng.uniform(*scale))
        aspect = math.exp(float(rng.uniform(*log_ratio)))
        crop_w = round(math.sqrt(target_area * aspect))
        crop_h = round(math.sqrt(target_area / aspect))
        if 0 < crop_w <= w and 0 < crop_h <= h:
            left = int(rng.integers(0, w - crop_w + 1))
            top = int(rng.integers(0, h - crop_h + 1))
            patch = img.crop((left, top, left + crop_w, top + crop_h))
            return patch.resize((size, size), RESAMPLE)
    return _center_crop(img, min(w, h)).resize((size, size), RESAMPLE)


def _center_crop(img: Image.Image, size: int) -> Image.Image:
    w, h = img.size
    left = (w - size) // 2
    top = (h - size) // 2
    return img.crop((left, top, left + size, top + size))

"""Encoders mapping texts and images into one shared embedding space.

Two implementations sit behind the same interface: a vision-language
checkpoint loaded through transformers ("clip:<path-or-id>" or any bare
model reference), and the dependency-free ``color-probe`` encoder, which
embeds images by color-distribution statistics and texts by the color
vocabulary they mention. The color probe is deterministic and needs no
weights, so export pipelines and their tests run fully offline; it is a
test double, not a perception model.
"""

import re

import numpy as np
from PIL import Image

# name -> sRGB anchor used by both the image and the text side.
PALETTE = {
    "red": (230, 40, 40),
    "orange": (245, 140, 30),
    "yellow": (240, 220, 50),
    "green": (60, 180, 70),
    "cyan": (70, 215, 215),
    "blue": (50, 80, 220),
    "purple": (150, 60, 200),
    "magenta": (220, 60, 180),
    "brown": (140, 90, 40),
    "white": (245, 245, 245),
    "gray": (128, 128, 128),
    "black": (15, 15, 15),
}

_WORD = re.compile(r"[a-z]+")


class ColorProbeEncoder:
    """Deterministic shared-space encoder over color statistics.

    Feature layout (16 dims): 12 palette affinities, mean brightness,
    brightness spread, mean saturation, constant bias. Rows are returned
    unnormalized; the export layer L2-normalizes.
    """

    name = "color-probe"
    dim = len(PALETTE) + 4
    input_size = 64

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        anchors = list(PALETTE)
        for i, text in enumerate(texts):
            words = set(_WORD.findall(text.lower()))
            for j, name in enumerate(anchors):
                if name in words:
                    out[i, j] = 1.0
            if words & {"bright", "light", "pale"}:
                brightness = 0.8
            elif words & {"dark", "deep", "dim"}:
                brightness = 0.25
            else:
                brightness = 0.5
            out[i, -4] = brightness
            out[i, -3] = 0.1
            out[i, -2] = 0.6
            out[i, -1] = 1.0
        return out

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        anchors = np.array(list(PALETTE.values()), dtype=np.float64)
        out = np.zeros((len(images), self.dim))
        for i, img in enumerate(images):
            pixels = np.asarray(
                img.convert("RGB").resize((16, 16), Image.Resampling.BILINEAR),
                dtype=np.float64,
            ).reshape(-1, 3)
            dists = np.linalg.norm(pixels[:, None, :] - anchors[None, :, :], axis=2)
            nearest = np.argmin(dists, axis=1)
            fractions = np.bincount(nearest, minlength=len(PALETTE)) / len(pixels)
            brightness = pixels.mean(axis=1) / 255.0
            saturation = (pixels.max(axis=1) - pixels.min(axis=1)) / 255.0
            out[i, : len(PALETTE)] = fractions
            out[i, -4] = brightness.mean()
            out[i, -3] = brightness.std()
            out[i, -2] = saturation.mean()
            out[i, -1] = 1.0
        return out


class ClipEncoder:
    """Vision-language checkpoint behind the transformers API.

    ``model_ref`` may be a local checkpoint directory or a hub id; needs
    the optional [clip] dependencies installed and the weights reachable.
    """

    def __init__(self, model_ref: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "the clip encoder needs the optional [clip] dependencies "
                "(transformers, torch)"
            ) from exc
        self._torch = torch
        self.name = model_ref
        self.model = CLIPModel.from_pretrained(model_ref)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(model_ref)
        crop = self.processor.image_processor.crop_size
        self.input_size = crop["height"] if isinstance(crop, dict) else int(crop)
        self.dim = self.model.config.projection_dim

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        batch = self.processor(
            text=texts, return_tensors="pt", padding=True, truncation=True
        )
        with self._torch.no_grad():
            features = self.model.get_text_features(**batch)
        return features.cpu().numpy().astype(np.float64)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        batch = self.processor(images=images, return_tensors="pt")
        with self._torch.no_grad():
            features = self.model.get_image_features(**batch)
        return features.cpu().numpy().astype(np.float64)


def get_encoder(model_ref: str):
    """``color-probe`` selects the built-in encoder; anything else is
    treated as a transformers checkpoint reference."""
    if model_ref == ColorProbeEncoder.name:
        return ColorProbeEncoder()
    return ClipEncoder(model_ref.removeprefix("clip:"))

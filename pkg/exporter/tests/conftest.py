import json

import numpy as np
import pytest
from PIL import Image

from tpse_exporter.encoders import PALETTE

SMOKE_CLASSES = [
    "red", "orange", "yellow", "green", "cyan",
    "blue", "purple", "magenta", "brown", "gray",
]


def noisy_color_image(rng, color, size=72):
    base = np.array(color, dtype=np.float64)
    pixels = base + rng.normal(0, 18.0, size=(size, size, 3))
    return Image.fromarray(np.clip(pixels, 0, 255).astype(np.uint8))


@pytest.fixture()
def image_dataset(tmp_path):
    """10 color classes x 5 images, with an images.json listing them."""
    rng = np.random.default_rng(7)
    img_dir = tmp_path / "images"
    img_dir.mkdir()
    entries = []
    for label, cls in enumerate(SMOKE_CLASSES):
        for i in range(5):
            name = f"{cls}_{i}.png"
            noisy_color_image(rng, PALETTE[cls]).save(img_dir / name)
            entries.append({"path": f"images/{name}", "label": label})
    listing = tmp_path / "images.json"
    listing.write_text(
        json.dumps({"class_names": SMOKE_CLASSES, "images": entries})
    )
    return listing


@pytest.fixture()
def templates_file(tmp_path):
    path = tmp_path / "templates.txt"
    path.write_text("a photo of a {} object.\na close-up photo of a {} thing.\n")
    return path


@pytest.fixture()
def classes_file(tmp_path):
    path = tmp_path / "classes.txt"
    path.write_text("\n".join(SMOKE_CLASSES) + "\n")
    return path

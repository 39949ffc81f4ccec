import numpy as np
import pytest
from PIL import Image

from tpse_exporter.encoders import PALETTE, ColorProbeEncoder, get_encoder


def solid(color, size=40):
    return Image.new("RGB", (size, size), color)


def normalized(mat):
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


class TestColorProbe:
    def test_text_image_alignment_across_palette(self):
        enc = ColorProbeEncoder()
        names = list(PALETTE)
        images = normalized(enc.encode_images([solid(PALETTE[n]) for n in names]))
        texts = normalized(
            enc.encode_texts([f"a photo of a {n} object." for n in names])
        )
        sims = texts @ images.T
        matches = np.argmax(sims, axis=1)
        # Every color prompt must retrieve its own color patch.
        np.testing.assert_array_equal(matches, np.arange(len(names)))

    def test_encode_is_deterministic(self):
        enc = ColorProbeEncoder()
        img = solid((10, 200, 30))
        np.testing.assert_array_equal(
            enc.encode_images([img]), enc.encode_images([img])
        )
        np.testing.assert_array_equal(
            enc.encode_texts(["green grass"]), enc.encode_texts(["green grass"])
        )

    def test_brightness_words(self):
        enc = ColorProbeEncoder()
        bright, dark = enc.encode_texts(["a bright red square", "a dark red square"])
        assert bright[-4] > dark[-4]

    def test_dims(self):
        enc = ColorProbeEncoder()
        assert enc.encode_texts(["x"]).shape == (1, enc.dim)
        assert enc.encode_images([solid((1, 2, 3))]).shape == (1, enc.dim)


class TestRegistry:
    def test_color_probe_lookup(self):
        assert isinstance(get_encoder("color-probe"), ColorProbeEncoder)

    def test_unavailable_checkpoint_raises_cleanly(self):
        with pytest.raises(Exception):
            get_encoder("definitely/not-a-local-checkpoint")

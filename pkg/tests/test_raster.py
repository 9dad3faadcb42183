import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from ductscan.raster import (
    BinaryImage,
    DrawingError,
    binarize,
    load_drawing,
    save_drawing,
    validate_standard,
)
from ductscan.synthgen import DuctSpec, Layout, render

import oracles


def _save(tmp_path, im, name="d.png"):
    p = tmp_path / name
    im.save(p)
    return p


def test_all_white_opaque_has_no_ink(tmp_path):
    img = load_drawing(_save(tmp_path, Image.new("RGB", (10, 10), "white")), 0.5)
    assert img.foreground_count() == 0
    assert img.mm_per_px is None


def test_fully_transparent_has_no_ink(tmp_path):
    img = load_drawing(_save(tmp_path, Image.new("RGBA", (10, 10), (0, 0, 0, 0))))
    assert img.foreground_count() == 0


def test_black_pixels_are_ink_in_every_mode(tmp_path):
    base = np.full((6, 8), 255, dtype=np.uint8)
    base[2, 3] = 0
    base[4, 5] = 0
    expected = base == 0
    ims = {
        "L": Image.fromarray(base, "L"),
        "RGB": Image.fromarray(np.dstack([base] * 3), "RGB"),
        "LA": Image.fromarray(np.dstack([base, np.full_like(base, 255)]), "LA"),
        "I16": Image.fromarray(base.astype(np.uint16) * 257).convert("I;16"),
        "P": Image.fromarray(base, "L").convert("P"),
    }
    for mode, im in ims.items():
        img = load_drawing(_save(tmp_path, im, f"{mode}.png"))
        assert np.array_equal(img.bits, expected), mode


def test_ink_under_zero_alpha_is_background(tmp_path):
    rgba = np.zeros((4, 4, 4), dtype=np.uint8)
    rgba[..., 3] = 255
    rgba[1, 1, 3] = 0
    img = load_drawing(_save(tmp_path, Image.fromarray(rgba, "RGBA")))
    assert img.foreground_count() == 15
    assert not img.bits[1, 1]


def test_threshold_is_strict(tmp_path):
    grey = np.array([[0, 127, 128, 255]], dtype=np.uint8)
    img = load_drawing(_save(tmp_path, Image.fromarray(grey, "L")), 0.5)
    assert img.bits.tolist() == [[True, True, False, False]]


def test_rendered_duct_ink_count_matches_renderer(tmp_path):
    layout = Layout(
        ducts=[DuctSpec((300, 200), 0, 300, 100, 100, annotate=False)],
        reference_mm=(600, 600),
        canvas_px=(900, 900),
    )
    img, truth = render(layout)
    p = tmp_path / "duct.png"
    save_drawing(img, p)
    assert load_drawing(p).foreground_count() == truth.ink_pixels


def test_renderer_ring_matches_pixel_by_pixel_count():
    layout = Layout(
        ducts=[DuctSpec((100, 80), 0, 120, 60, 100, annotate=False)],
        reference_mm=(1000, 1000),
        canvas_px=(1300, 1300),
    )
    img, _ = render(layout)
    window = img.bits[:200, :250]
    assert int(window.sum()) == oracles.ring_ink_pixels(40, 50, 160, 110, 6, 250, 200)


def test_unreadable_and_missing_files(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not a png")
    with pytest.raises(DrawingError):
        load_drawing(bad)
    with pytest.raises(DrawingError):
        load_drawing(tmp_path / "missing.png")


def test_non_png_rejected(tmp_path):
    p = tmp_path / "d.bmp"
    Image.new("L", (4, 4), 255).save(p)
    with pytest.raises(DrawingError):
        load_drawing(p)


def test_binary_image_validation():
    with pytest.raises(ValueError):
        BinaryImage(np.zeros((0, 5), dtype=bool))
    with pytest.raises(ValueError):
        BinaryImage(np.zeros((3, 3), dtype=bool), mm_per_px=0.0)
    with pytest.raises(ValueError):
        BinaryImage(np.zeros((3, 3), dtype=bool), mm_per_px=float("nan"))
    img = BinaryImage(np.zeros((3, 4), dtype=bool), mm_per_px=2.0)
    assert (img.width, img.height) == (4, 3)
    with pytest.raises(ValueError):
        img.bits[0, 0] = True


def test_validate_standard():
    assert validate_standard(BinaryImage(np.zeros((4320, 7680), dtype=bool))) == []
    assert len(validate_standard(BinaryImage(np.zeros((800, 1000), dtype=bool)))) == 1
    assert validate_standard(BinaryImage(np.zeros((4320, 7680), dtype=bool), mm_per_px=1.0)) == []


masks = arrays(np.bool_, st.tuples(st.integers(1, 24), st.integers(1, 24)))


@settings(max_examples=60, deadline=None)
@given(masks)
def test_binarization_is_idempotent(mask):
    img = BinaryImage(mask)
    rgba = img.to_rgba()
    lum = rgba[..., 0].astype(float) / 255.0
    alpha = rgba[..., 3].astype(float) / 255.0
    assert np.array_equal(binarize(lum, alpha), mask)


@settings(max_examples=60, deadline=None)
@given(masks, st.integers(0, 5), st.integers(0, 5), st.integers(0, 5), st.integers(0, 5))
def test_foreground_count_ignores_background_padding(mask, top, bottom, left, right):
    padded = np.pad(mask, ((top, bottom), (left, right)), constant_values=False)
    assert BinaryImage(padded).foreground_count() == BinaryImage(mask).foreground_count()


@settings(max_examples=20, deadline=None)
@given(masks)
def test_save_load_round_trip(tmp_path_factory, mask):
    p = tmp_path_factory.mktemp("rt") / "m.png"
    save_drawing(BinaryImage(mask), p)
    assert np.array_equal(load_drawing(p).bits, mask)

import io

import numpy as np
import png
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roomscan.errors import DimensionMismatch, MalformedInput, OutOfRange
from roomscan.imaging import (HsvImage, MonoMask, RgbImage, decode_png, encode_png, hsv_to_rgb, hue_mask,
                              luminosity_mask, mask_and, rgb_to_hsv)

from oracles import circ_dist, hsv_pixel


def _png(rows, **kw):
    buf = io.BytesIO()
    png.Writer(**kw).write(buf, rows)
    return buf.getvalue()


unit = st.floats(0.0, 1.0, allow_nan=False)
small_images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3)), elements=unit)
masks = st.integers(1, 8).flatmap(
    lambda h: st.integers(1, 8).flatmap(lambda w: arrays(bool, (h, w))))


# -- decode_png --------------------------------------------------------------

def test_decode_single_red_pixel():
    img = decode_png(_png([[255, 0, 0]], width=1, height=1, greyscale=False))
    assert (img.width, img.height) == (1, 1)
    assert img.pixels[0, 0].tolist() == [1.0, 0.0, 0.0]


def test_decode_black():
    img = decode_png(_png([[0] * 6] * 2, width=2, height=2, greyscale=False))
    assert not img.pixels.any()


def test_decode_greyscale_replicated_and_alpha_dropped():
    grey = decode_png(_png([[0, 51]], width=2, height=1, greyscale=True))
    np.testing.assert_array_equal(grey.pixels[0, 1], [0.2, 0.2, 0.2])
    rgba = decode_png(_png([[10, 20, 30, 0]], width=1, height=1, greyscale=False, alpha=True))
    np.testing.assert_allclose(rgba.pixels[0, 0], np.array([10, 20, 30]) / 255)


def test_decode_16bit():
    img = decode_png(_png([[65535, 0, 32768]], width=1, height=1, greyscale=False, bitdepth=16))
    np.testing.assert_array_equal(img.pixels[0, 0], [1.0, 0.0, 32768 / 65535])


def test_decode_palette_and_interlaced():
    pal = _png([[0, 1]], width=2, height=1, palette=[(255, 0, 0), (0, 0, 255)])
    np.testing.assert_array_equal(decode_png(pal).pixels[0], [[1, 0, 0], [0, 0, 1]])
    inter = _png([[9, 8, 7] * 3] * 3, width=3, height=3, greyscale=False, interlace=True)
    np.testing.assert_allclose(decode_png(inter).pixels[2, 2], np.array([9, 8, 7]) / 255)


@pytest.mark.parametrize("data", [b"", b"not a png at all", b"\x89PNG\r\n\x1a\n" + b"\x00" * 20])
def test_decode_garbage(data):
    with pytest.raises(MalformedInput):
        decode_png(data)


@pytest.mark.parametrize("bitdepth", [8, 16])
def test_png_round_trip_random(rng, bitdepth):
    scale = 2 ** bitdepth - 1
    for _ in range(20):
        h, w = rng.integers(1, 20, size=2)
        raw = rng.integers(0, scale + 1, size=(h, w, 3))
        img = RgbImage(raw / scale)
        back = decode_png(encode_png(img, bitdepth=bitdepth))
        np.testing.assert_array_equal(back.pixels, img.pixels)


def test_mask_png_round_trip(rng):
    m = MonoMask(rng.random((7, 9)) > 0.5)
    back = decode_png(encode_png(m))
    np.testing.assert_array_equal(back.pixels[..., 0] == 1.0, m.bits)


def test_rgb_image_validates():
    with pytest.raises(OutOfRange):
        RgbImage(np.full((1, 1, 3), 1.5))
    with pytest.raises(DimensionMismatch):
        RgbImage(np.zeros((2, 2)))


# -- rgb_to_hsv ---------------------------------------------------------------

@pytest.mark.parametrize("rgb, hsv", [
    ((1.0, 0.0, 0.0), (0.0, 1.0, 1.0)),
    ((0.5, 0.5, 0.5), (0.0, 0.0, 0.5)),
    ((0.0, 1.0, 0.0), (1 / 3, 1.0, 1.0)),
    ((0.0, 0.0, 1.0), (2 / 3, 1.0, 1.0)),
    ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
])
def test_rgb_to_hsv_reference_points(rgb, hsv):
    out = rgb_to_hsv(RgbImage(np.array([[rgb]]))).pixels[0, 0]
    np.testing.assert_allclose(out, hsv, atol=1e-15)


def test_rgb_to_hsv_matches_colorsys(rng):
    img = RgbImage(rng.random((20, 30, 3)))
    out = rgb_to_hsv(img).pixels
    for y in range(20):
        for x in range(30):
            ref = hsv_pixel(*img.pixels[y, x])
            assert circ_dist(out[y, x, 0], ref[0]) < 1e-12
            assert out[y, x, 1:] == pytest.approx(ref[1:], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(small_images)
def test_value_channel_is_exact_max(px):
    hsv = rgb_to_hsv(RgbImage(px))
    assert np.array_equal(hsv.value, px.max(axis=2))
    assert hsv.pixels.min() >= 0.0 and hsv.pixels.max() <= 1.0


@settings(max_examples=60, deadline=None)
@given(small_images)
def test_hsv_round_trip(px):
    back = hsv_to_rgb(rgb_to_hsv(RgbImage(px)))
    np.testing.assert_allclose(back.pixels, px, atol=1e-12)


# -- luminosity_mask ------------------------------------------------------------

def test_luminosity_zero_image():
    img = HsvImage(np.zeros((4, 5, 3)))
    assert not luminosity_mask(img, 0.5).bits.any()


def test_luminosity_threshold_zero_keeps_all(rng):
    img = HsvImage(rng.random((6, 6, 3)))
    assert luminosity_mask(img, 0.0).bits.all()


def test_luminosity_inclusive_boundary():
    img = HsvImage(np.array([[[0, 0, 0.5], [0, 0, 0.4999]]]))
    assert luminosity_mask(img, 0.5).bits.tolist() == [[True, False]]


def test_luminosity_matches_pixel_scan(rng):
    img = HsvImage(rng.random((15, 17, 3)))
    for t in rng.random(10):
        bits = luminosity_mask(img, t).bits
        for y in range(15):
            for x in range(17):
                assert bits[y, x] == (img.pixels[y, x, 2] >= t)


@pytest.mark.parametrize("t", [-0.01, 1.01])
def test_luminosity_out_of_range(t):
    with pytest.raises(OutOfRange):
        luminosity_mask(HsvImage(np.zeros((1, 1, 3))), t)


@settings(max_examples=60, deadline=None)
@given(small_images, unit, unit)
def test_luminosity_monotone(px, t1, t2):
    img = HsvImage(px)
    lo, hi = sorted((t1, t2))
    strict = luminosity_mask(img, hi).bits
    loose = luminosity_mask(img, lo).bits
    assert not (strict & ~loose).any()


# -- hue_mask -------------------------------------------------------------------

def _one(h, s=1.0, v=1.0):
    return HsvImage(np.array([[[h, s, v]]]))


def test_hue_identity():
    assert hue_mask(_one(0.33), 0.33, 0.0).bits[0, 0]


def test_hue_wraparound():
    # circular distance 0.02
    assert hue_mask(_one(0.99), 0.01, 0.05).bits[0, 0]
    assert not hue_mask(_one(0.99), 0.01, 0.019).bits[0, 0]


def test_hue_matches_circular_oracle(rng):
    img = HsvImage(rng.random((12, 14, 3)))
    for target, thr in zip(rng.random(8), rng.random(8) * 0.5):
        bits = hue_mask(img, target, thr).bits
        for y in range(12):
            for x in range(14):
                assert bits[y, x] == (circ_dist(img.pixels[y, x, 0], target) <= thr)


def test_hue_saturation_floor():
    img = HsvImage(np.array([[[0.0, 0.0, 1.0], [0.0, 0.9, 1.0]]]))
    assert hue_mask(img, 0.0, 0.1).bits.tolist() == [[True, True]]
    assert hue_mask(img, 0.0, 0.1, saturation_min=0.5).bits.tolist() == [[False, True]]


@pytest.mark.parametrize("target, thr", [(-0.1, 0.1), (1.1, 0.1), (0.5, 0.6), (0.5, -0.01)])
def test_hue_out_of_range(target, thr):
    with pytest.raises(OutOfRange):
        hue_mask(_one(0.5), target, thr)


@settings(max_examples=60, deadline=None)
@given(small_images, st.integers(0, 2 ** 20), st.floats(0.0, 0.5))
def test_hue_target_periodic(px, k, thr):
    # dyadic targets make the +1 shift exact in floating point
    img = HsvImage(px)
    target = k / 2 ** 20
    shifted = (target + 1.0) % 1.0
    assert hue_mask(img, target, thr) == hue_mask(img, shifted, thr)


# -- mask_and -------------------------------------------------------------------

def test_mask_and_identity_and_absorbing(rng):
    a = MonoMask(rng.random((5, 7)) > 0.5)
    assert mask_and(a, MonoMask(np.ones((5, 7), bool))) == a
    assert not mask_and(a, MonoMask(np.zeros((5, 7), bool))).bits.any()


def test_mask_and_pointwise(rng):
    a = rng.random((9, 11)) > 0.5
    b = rng.random((9, 11)) > 0.4
    out = mask_and(MonoMask(a), MonoMask(b)).bits
    for y in range(9):
        for x in range(11):
            assert out[y, x] == (a[y, x] and b[y, x])


def test_mask_and_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mask_and(MonoMask(np.zeros((2, 3), bool)), MonoMask(np.zeros((3, 2), bool)))


@settings(max_examples=60, deadline=None)
@given(masks.flatmap(lambda m: st.tuples(st.just(m), arrays(bool, m.shape), arrays(bool, m.shape))))
def test_mask_and_algebra(abc):
    a, b, c = (MonoMask(x) for x in abc)
    assert mask_and(a, b) == mask_and(b, a)
    assert mask_and(mask_and(a, b), c) == mask_and(a, mask_and(b, c))
    assert mask_and(a, a) == a


def test_filters_are_pure(rng):
    img = HsvImage(rng.random((10, 10, 3)))
    assert luminosity_mask(img, 0.3) == luminosity_mask(img, 0.3)
    assert hue_mask(img, 0.2, 0.1, 0.2) == hue_mask(img, 0.2, 0.1, 0.2)
    assert np.array_equal(rgb_to_hsv(RgbImage(img.pixels)).pixels, rgb_to_hsv(RgbImage(img.pixels)).pixels)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from waekit.errors import DomainError
from waekit.imageprep import (
    AugmentConfig,
    AugmentParams,
    apply_augment,
    augment_batch,
    normalize,
    preprocess,
    reflect_index,
    resize_bilinear,
    sample_params,
    to_uint8,
)


def mirror(i, n):
    """Edge-inclusive mirror, written as a walk rather than modular arithmetic."""
    while i < 0 or i >= n:
        if i < 0:
            i = -1 - i
        if i >= n:
            i = 2 * n - 1 - i
    return i


def reference_warp(img, p):
    """Per-output-pixel inverse mapping, one pixel at a time."""
    h, w, c = img.shape
    cx, cy = (w - 1) / 2, (h - 1) / 2
    a = math.radians(p.angle_deg)
    t = math.tan(math.radians(p.shear))
    out = np.zeros_like(img)
    for r in range(h):
        for col in range(w):
            # undo translation, zoom, shear, rotation in that order
            x = (col - cx - p.dx) / p.zoom
            y = (r - cy - p.dy) / p.zoom
            x = x - t * y
            xs = math.cos(a) * x + math.sin(a) * y + cx
            ys = -math.sin(a) * x + math.cos(a) * y + cy
            x0, y0 = math.floor(xs), math.floor(ys)
            fx, fy = xs - x0, ys - y0
            for ch in range(c):
                v00 = img[mirror(y0, h), mirror(x0, w), ch]
                v01 = img[mirror(y0, h), mirror(x0 + 1, w), ch]
                v10 = img[mirror(y0 + 1, h), mirror(x0, w), ch]
                v11 = img[mirror(y0 + 1, h), mirror(x0 + 1, w), ch]
                top = v00 + (v01 - v00) * fx
                bot = v10 + (v11 - v10) * fx
                out[r, col, ch] = min(1.0, max(0.0, (top + (bot - top) * fy) * p.brightness))
    return out


def checker_pattern():
    r, c = np.mgrid[0:8, 0:8]
    return (((r // 2 + c // 2) % 2) * 0.7 + 0.1 * r / 7 + 0.05 * c / 7)[:, :, None]


@pytest.mark.parametrize("raw, expected", [(255, 1.0), (0, 0.0), (51, 0.2)])
def test_normalize(raw, expected):
    assert normalize(np.full((1, 1), raw))[0, 0, 0] == expected


def test_normalize_range():
    with pytest.raises(DomainError):
        normalize(np.array([[256.0]]))
    with pytest.raises(DomainError):
        normalize(np.array([[-1.0]]))


def test_to_uint8_half_up():
    assert to_uint8(np.array([[0.0, 1.0, 0.5, 2 / 255]])).ravel().tolist() == [0, 255, 128, 2]


def test_resize_same_size_bit_identical(rng):
    img = rng.random((5, 7, 3))
    assert np.array_equal(resize_bilinear(img, 5, 7), img)


def test_resize_constant(rng):
    out = resize_bilinear(np.full((3, 4, 1), 0.37), 11, 6)
    assert out.shape == (11, 6, 1)
    assert np.allclose(out, 0.37, atol=1e-15)


def test_resize_two_by_two_to_one():
    # centre sample (0.5, 0.5) under (dst + 0.5) * scale - 0.5
    img = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert resize_bilinear(img, 1, 1)[0, 0, 0] == 0.5


def test_resize_upsample_matches_hand_values():
    img = np.array([[0.0, 1.0]])
    out = resize_bilinear(img, 1, 4)[0, :, 0]
    # src x = (d + 0.5) / 2 - 0.5 -> -0.25, 0.25, 0.75, 1.25, clamped to [0, 1]
    assert out.tolist() == [0.0, 0.25, 0.75, 1.0]


def test_resize_rejects_zero():
    with pytest.raises(DomainError):
        resize_bilinear(np.zeros((2, 2)), 0, 3)


def test_preprocess_target_size():
    out = preprocess(np.full((30, 20), 255, dtype=np.uint8))
    assert out.shape == (224, 224, 1) and np.all(out == 1.0)


def test_sample_params_degenerate_config():
    p = sample_params(AugmentConfig.identity(), np.random.default_rng(0), (10, 10))
    assert p == AugmentParams()


def test_sample_params_deterministic():
    cfg = AugmentConfig()
    a = sample_params(cfg, np.random.default_rng(5), (224, 224))
    b = sample_params(cfg, np.random.default_rng(5), (224, 224))
    assert a == b


def test_sample_params_intervals_and_mean():
    cfg = AugmentConfig()
    rng = np.random.default_rng(123)
    draws = [sample_params(cfg, rng, (224, 200)) for _ in range(10_000)]
    angle = np.array([d.angle_deg for d in draws])
    assert np.all(np.abs(angle) <= 5)
    assert all(abs(d.dx) <= 0.05 * 200 and abs(d.dy) <= 0.05 * 224 for d in draws)
    assert all(abs(d.shear) <= 0.05 for d in draws)
    assert all(0.95 <= d.zoom <= 1.05 for d in draws)
    assert all(0.9 <= d.brightness <= 1.1 for d in draws)
    assert abs(angle.mean()) <= 0.2


def test_config_validation():
    with pytest.raises(DomainError):
        AugmentConfig(rotation_deg=-1)
    with pytest.raises(DomainError):
        AugmentConfig(brightness=(1.1, 0.9))
    with pytest.raises(DomainError):
        AugmentConfig(fill="nearest")
    with pytest.raises(DomainError):
        AugmentConfig.from_dict({"rotation": 3})
    assert AugmentConfig.from_dict(AugmentConfig().to_dict()) == AugmentConfig()


def test_identity_augment_bit_exact(rng):
    img = rng.random((9, 6, 3))
    assert np.array_equal(apply_augment(img, AugmentParams()), img)


def test_brightness_only():
    out = apply_augment(np.full((4, 4, 1), 0.5), AugmentParams(brightness=1.1))
    assert np.allclose(out, 0.55, atol=1e-15)


def test_rotation_matches_reference():
    img = checker_pattern()
    p = AugmentParams(angle_deg=5.0)
    assert np.max(np.abs(apply_augment(img, p) - reference_warp(img, p))) <= 1e-6


@pytest.mark.parametrize(
    "p",
    [
        AugmentParams(angle_deg=-4.0, dx=0.4, dy=-0.3, shear=0.05, zoom=1.04, brightness=0.93),
        AugmentParams(angle_deg=30.0, dx=3.0, dy=2.5, shear=10.0, zoom=0.8, brightness=1.2),
    ],
)
def test_composite_matches_reference(p, rng):
    img = rng.random((7, 9, 3))
    assert np.max(np.abs(apply_augment(img, p) - reference_warp(img, p))) <= 1e-6


def test_translation_by_whole_pixels_reflects():
    img = np.arange(5, dtype=float)[None, :, None] / 4
    out = apply_augment(img, AugmentParams(dx=2.0))[0, :, 0]
    # dst x samples src x - 2: -2, -1, 0, 1, 2 -> mirror to 1, 0, 0, 1, 2
    assert out.tolist() == (np.array([1, 0, 0, 1, 2]) / 4).tolist()


def test_reflect_index_contract():
    assert reflect_index(-1, 5) == 0
    assert reflect_index(5, 5) == 4
    assert reflect_index(-3, 5) == 2
    for n in (1, 2, 5):
        for i in range(-n, 2 * n):
            r = reflect_index(i, n)
            assert r == mirror(i, n)
            assert reflect_index(r, n) == r


@given(
    st.floats(-5, 5), st.floats(-2, 2), st.floats(-2, 2), st.floats(-0.05, 0.05),
    st.floats(0.95, 1.05), st.floats(0.9, 1.1), st.integers(0, 2**31),
)
def test_augment_range_and_shape(angle, dx, dy, shear, zoom, bright, seed):
    img = np.random.default_rng(seed).random((6, 5, 3))
    out = apply_augment(img, AugmentParams(angle, dx, dy, shear, zoom, bright))
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_apply_augment_rejects_unnormalized():
    with pytest.raises(DomainError):
        apply_augment(np.full((2, 2), 3.0), AugmentParams())


def test_augment_batch_determinism(rng):
    imgs = [rng.random((12, 10, 1)), rng.random((8, 8, 3))]
    a = augment_batch(imgs, AugmentConfig(), seed=42, count_per_image=3)
    b = augment_batch(imgs, AugmentConfig(), seed=42, count_per_image=3)
    assert len(a) == 6
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))
    c = augment_batch(imgs, AugmentConfig(), seed=43, count_per_image=3)
    assert not np.array_equal(a[0], c[0])


def test_augment_batch_substreams_independent_of_batch(rng):
    imgs = [rng.random((6, 6, 1)), rng.random((6, 6, 1))]
    both = augment_batch(imgs, AugmentConfig(), seed=9, count_per_image=2)
    first = augment_batch(imgs[:1], AugmentConfig(), seed=9, count_per_image=2)
    assert all(np.array_equal(x, y) for x, y in zip(both[:2], first))


def test_augment_batch_count_zero_and_identity(rng):
    imgs = [rng.random((5, 5, 1))]
    assert augment_batch(imgs, AugmentConfig(), 0, 0) == []
    out = augment_batch(imgs, AugmentConfig.identity(), 0, 3)
    assert all(np.array_equal(o, imgs[0]) for o in out)

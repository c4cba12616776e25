"""Smoke tests for the python bindings: physics, metrics, DCP, tiny training."""

import json
import math
import os

import numpy as np
import pytest

import hazegan


def smooth_scene(rng, size):
    grid = rng.uniform(0.1, 0.9, size=(3, 3, 3)).astype(np.float32)
    img = np.zeros((size, size, 3), dtype=np.float32)
    for y in range(size):
        for x in range(size):
            gy, gx = 2 * y / (size - 1), 2 * x / (size - 1)
            y0, x0 = min(int(gy), 1), min(int(gx), 1)
            fy, fx = gy - y0, gx - x0
            img[y, x] = (1 - fy) * ((1 - fx) * grid[y0, x0] + fx * grid[y0, x0 + 1]) + fy * (
                (1 - fx) * grid[y0 + 1, x0] + fx * grid[y0 + 1, x0 + 1]
            )
    return img


def test_physics_round_trip():
    rng = np.random.default_rng(1)
    clear = rng.uniform(0, 1, size=(24, 24, 3)).astype(np.float32)
    depth = rng.uniform(0.1, 1.5, size=(24, 24)).astype(np.float32)
    k = 0.8
    airlight = [0.9, 0.9, 0.9]

    t = hazegan.transmission(depth, k)
    assert t.shape == (24, 24)
    assert np.all(t > 0) and np.all(t <= 1)

    hazy = hazegan.synthesize_haze(clear, depth, k, airlight)
    assert hazy.shape == clear.shape
    restored = hazegan.restore_with_transmission(hazy, t, airlight, t_floor=0.05)
    mask = t >= 0.05
    assert np.max(np.abs(restored[mask] - clear[mask])) <= 1e-5


def test_transmission_validates_k():
    depth = np.ones((4, 4), dtype=np.float32)
    with pytest.raises(ValueError):
        hazegan.transmission(depth, -1.0)


def test_metric_identities():
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, size=(16, 16, 3)).astype(np.float32)
    assert hazegan.psnr(img, img) == 100.0
    assert hazegan.ssim(img, img) == 1.0
    assert hazegan.gradient_ratio(img, img) == pytest.approx(1.0, abs=1e-9)
    assert hazegan.saturation_sigma(img, img) == 0.0
    assert hazegan.contrast_gain(img, img) == 0.0

    flat_a = np.full((16, 16, 3), 0.4, dtype=np.float32)
    flat_b = np.full((16, 16, 3), 0.5, dtype=np.float32)
    assert hazegan.psnr(flat_a, flat_b) == pytest.approx(20.0, abs=1e-5)


def test_dcp_improves_synthetic_haze():
    rng = np.random.default_rng(3)
    clear = smooth_scene(rng, 48)
    # one dark channel per pixel keeps the prior valid
    dark_channel = rng.integers(0, 3, size=(48, 48))
    for c in range(3):
        clear[..., c] = np.where(dark_channel == c, 0.02, clear[..., c])
    depth = np.full((48, 48), 1.0, dtype=np.float32)
    hazy = hazegan.synthesize_haze(clear.astype(np.float32), depth, 1.2, [0.9, 0.9, 0.9])

    restored = hazegan.dcp_dehaze(hazy)
    assert restored.shape == hazy.shape
    assert hazegan.psnr(clear, restored) > hazegan.psnr(clear, hazy)


def test_synthetic_dataset_and_split(tmp_path):
    manifest = hazegan.generate_synthetic_dataset(
        str(tmp_path / "data"), n=10, image_size=16, seed=9
    )
    assert os.path.exists(manifest)
    with open(manifest) as fh:
        payload = json.load(fh)
    assert len(payload["pairs"]) == 10

    n_train, n_test = hazegan.split_manifest(
        manifest, 0.2, 3, str(tmp_path / "train.json"), str(tmp_path / "test.json")
    )
    assert (n_train, n_test) == (8, 2)


def test_tiny_training_and_inference(tmp_path):
    manifest = hazegan.generate_synthetic_dataset(
        str(tmp_path / "data"), n=8, image_size=16, seed=5
    )
    summary = hazegan.train(
        manifest,
        image_size=16,
        g_width=4,
        g_depth=3,
        critic_widths=[4, 8],
        batch_size=2,
        epochs=1,
        n_critic=5,
        vgg_tap="conv1_1",
        seed=2,
        checkpoint_dir=str(tmp_path / "ckpts"),
    )
    assert summary["generator_steps"] == 4
    assert summary["critic_steps"] == 20
    ckpt = summary["checkpoint"]
    assert os.path.exists(ckpt)

    rng = np.random.default_rng(7)
    hazy = rng.uniform(0, 1, size=(16, 16, 3)).astype(np.float32)
    restored = hazegan.dehaze_image(ckpt, hazy)
    assert restored.shape == (16, 16, 3)
    assert np.all(restored >= 0) and np.all(restored <= 1)
    assert np.all(np.isfinite(restored))


def test_evaluate_set(tmp_path):
    manifest = hazegan.generate_synthetic_dataset(
        str(tmp_path / "data"), n=4, image_size=16, seed=11
    )
    report = hazegan.evaluate_set(manifest, str(tmp_path / "data" / "clear"))
    assert report["evaluated"] == 4
    assert report["psnr"]["count"] == 4
    assert report["ssim"]["mean"] == pytest.approx(1.0)
    assert math.isfinite(report["r"]["mean"])

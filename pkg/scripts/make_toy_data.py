"""Generates the committed toy corpora under tests/data/.

Deterministic smooth sinusoid-plus-edges images: low-frequency enough that
a small generator can overfit them within a few hundred iterations, but
with enough structure that feature losses have something to match.
"""

from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parent.parent / "tests" / "data"


def smooth_image(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, 3))
    for c in range(3):
        for _ in range(4):
            fx, fy = rng.uniform(0.5, 3.0, 2)
            ph = rng.uniform(0, 2 * np.pi, 2)
            img[:, :, c] += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * fx * xx + ph[0]) * np.cos(
                2 * np.pi * fy * yy + ph[1]
            )
    # a hard edge per image so SR has high-frequency content to recover
    cut = rng.integers(size // 4, 3 * size // 4)
    img[:, cut:, :] += rng.uniform(0.5, 1.0)
    img -= img.min()
    img /= img.max()
    return (img * 255).round().astype(np.uint8)


def main():
    rng = np.random.default_rng(20240817)
    toy = ROOT / "toy"
    toy.mkdir(parents=True, exist_ok=True)
    for i in range(4):
        Image.fromarray(smooth_image(rng, 64)).save(toy / f"img{i}.png")

    labeled = ROOT / "toy_labeled"
    for cls, fn in (("stripes", _stripes), ("blobs", _blobs)):
        d = labeled / cls
        d.mkdir(parents=True, exist_ok=True)
        for i in range(10):
            Image.fromarray(fn(rng, 48)).save(d / f"{cls}{i}.png")


def _stripes(rng, size):
    yy, xx = np.mgrid[0:size, 0:size] / size
    f = rng.uniform(3, 6)
    base = 0.5 + 0.5 * np.sin(2 * np.pi * f * (xx + rng.uniform(0, 1)))
    img = np.stack([base * rng.uniform(0.6, 1.0) for _ in range(3)], axis=-1)
    return (img * 255).round().astype(np.uint8)


def _blobs(rng, size):
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, 3))
    for _ in range(5):
        cx, cy = rng.uniform(0, 1, 2)
        s = rng.uniform(0.05, 0.15)
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
        img += blob[:, :, None] * rng.uniform(0.3, 1.0, 3)
    img /= max(img.max(), 1e-9)
    return (img * 255).round().astype(np.uint8)


if __name__ == "__main__":
    main()

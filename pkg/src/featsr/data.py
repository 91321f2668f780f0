"""Corpus ingestion: cropping, 4x downscaling, [-1,1] normalization and
deterministic batching.

Manifest format is line-oriented text, one record per crop:

    path x y size seed

Reloading a manifest reproduces the exact same tensor pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .nn import DimensionError

SCALE = 4
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


class CorpusError(ValueError):
    pass


def normalize(image: np.ndarray) -> np.ndarray:
    """[0,255] -> [-1,1] float32, v/127.5 - 1."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("normalize expects values in [0,255]")
    return arr / 127.5 - 1.0


def denormalize(image: np.ndarray) -> np.ndarray:
    """[-1,1] -> uint8 [0,255], clamped and rounded."""
    arr = (np.asarray(image, dtype=np.float64) + 1.0) * 127.5
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def _cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    at = np.abs(t)
    w = np.where(
        at <= 1,
        (a + 2) * at**3 - (a + 3) * at**2 + 1,
        np.where(at < 2, a * at**3 - 5 * a * at**2 + 8 * a * at - 4 * a, 0.0),
    )
    return w


def _bicubic_weights(size: int, factor: int) -> np.ndarray:
    """Antialiased bicubic resampling matrix (size -> size/factor)."""
    out = size // factor
    mat = np.zeros((out, size), dtype=np.float64)
    support = 2.0 * factor
    for j in range(out):
        center = (j + 0.5) * factor - 0.5
        lo = int(np.floor(center - support)) + 1
        hi = int(np.ceil(center + support))
        idx = np.arange(lo, hi + 1)
        w = _cubic_kernel((idx - center) / factor)
        idx = np.clip(idx, 0, size - 1)  # edge replication
        w = w / w.sum()
        np.add.at(mat[j], idx, w)
    return mat


def downscale(hr: np.ndarray, factor: int = SCALE, mode: str = "bicubic") -> np.ndarray:
    """(C,H,W) -> (C,H/factor,W/factor). Bicubic (antialiased, edge
    replicated) by default; 'average' takes exact block means."""
    if hr.ndim != 3:
        raise DimensionError(f"downscale expects (C,H,W), got shape {hr.shape}")
    c, h, w = hr.shape
    if h % factor or w % factor:
        raise DimensionError(f"spatial extents {h}x{w} not divisible by factor {factor}")
    if mode == "average":
        return hr.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4)).astype(hr.dtype)
    if mode == "bicubic":
        mh = _bicubic_weights(h, factor)
        mw = _bicubic_weights(w, factor)
        out = np.einsum("ij,cjk,lk->cil", mh, hr.astype(np.float64), mw)
        return out.astype(np.float32)
    raise ValueError(f"unknown downscale mode {mode!r}")


@dataclass
class CropRecord:
    path: str
    x: int
    y: int
    size: int
    seed: int

    def line(self) -> str:
        return f"{self.path} {self.x} {self.y} {self.size} {self.seed}"

    @classmethod
    def parse(cls, line: str) -> "CropRecord":
        path, x, y, size, seed = line.split()
        return cls(path, int(x), int(y), int(size), int(seed))


class PairDataset:
    """Indexed (LR, HR) pairs in [-1,1] with the manifest that produced
    them. labels[i] is the class index when the corpus is labeled."""

    def __init__(self, pairs, manifest, split: str = "train", labels=None, class_names=None, lr_mode: str = "bicubic"):
        self.pairs = pairs  # list of (lr (3,h,w), hr (3,4h,4w)) float32
        self.manifest = manifest  # list[CropRecord]
        self.split = split
        self.labels = labels
        self.class_names = class_names
        self.lr_mode = lr_mode

    def __len__(self):
        return len(self.pairs)

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def hr_size(self) -> int:
        return self.pairs[0][1].shape[1]

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        lr = np.stack([self.pairs[i][0] for i in indices])
        hr = np.stack([self.pairs[i][1] for i in indices])
        return lr, hr

    def batch_labels(self, indices) -> np.ndarray:
        return np.asarray([self.labels[i] for i in indices], dtype=np.int64)

    def save_manifest(self, path):
        Path(path).write_text("".join(rec.line() + "\n" for rec in self.manifest))


def _validate_crop_size(crop_size: int):
    if crop_size % 4 or crop_size % 16:
        raise CorpusError(f"crop_size must be divisible by 4 and 16, got {crop_size}")


def _read_image(path: Path) -> np.ndarray | None:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except Exception as exc:  # corrupt files are skipped, not fatal
        warnings.warn(f"skipping unreadable image {path}: {exc}")
        return None


def _pair_from_record(rec: CropRecord, img: np.ndarray, lr_mode: str):
    crop = img[rec.y : rec.y + rec.size, rec.x : rec.x + rec.size]
    hr = normalize(crop).transpose(2, 0, 1)
    lr = downscale(hr, SCALE, lr_mode)
    return lr.astype(np.float32), hr.astype(np.float32)


def _list_images(directory: Path):
    labeled_dirs = sorted(d for d in directory.iterdir() if d.is_dir())
    if labeled_dirs:
        files, labels, names = [], [], [d.name for d in labeled_dirs]
        for ci, d in enumerate(labeled_dirs):
            for f in sorted(d.iterdir()):
                if f.suffix.lower() in IMAGE_EXTENSIONS:
                    files.append(f)
                    labels.append(ci)
        return files, labels, names
    files = sorted(f for f in directory.iterdir() if f.suffix.lower() in IMAGE_EXTENSIONS)
    return files, None, None


def load_corpus(
    directory,
    crop_size: int,
    crops_per_image: int,
    seed: int,
    split: str = "train",
    lr_mode: str = "bicubic",
) -> PairDataset:
    """Deterministic random crops from every readable image under
    `directory`. A directory-per-class layout yields a labeled corpus."""
    _validate_crop_size(crop_size)
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"corpus directory not found: {directory}")
    files, file_labels, class_names = _list_images(directory)
    rng = np.random.default_rng(seed)
    pairs, manifest, labels = [], [], []
    for fi, path in enumerate(files):
        img = _read_image(path)
        if img is None:
            continue
        h, w = img.shape[:2]
        if h < crop_size or w < crop_size:
            warnings.warn(f"skipping {path}: smaller than crop_size {crop_size}")
            continue
        for _ in range(crops_per_image):
            x = int(rng.integers(0, w - crop_size + 1))
            y = int(rng.integers(0, h - crop_size + 1))
            rec = CropRecord(str(path), x, y, crop_size, seed)
            pairs.append(_pair_from_record(rec, img, lr_mode))
            manifest.append(rec)
            if file_labels is not None:
                labels.append(file_labels[fi])
    if not pairs:
        raise CorpusError(f"no usable images in {directory}")
    return PairDataset(
        pairs, manifest, split, labels if file_labels is not None else None, class_names, lr_mode
    )


def load_manifest(path, split: str = "test", lr_mode: str = "bicubic") -> PairDataset:
    """Rebuild the exact dataset a manifest describes."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise CorpusError(f"empty manifest: {path}")
    pairs, manifest = [], []
    cache: dict[str, np.ndarray] = {}
    for ln in lines:
        rec = CropRecord.parse(ln)
        if rec.path not in cache:
            img = _read_image(Path(rec.path))
            if img is None:
                raise CorpusError(f"manifest references unreadable image {rec.path}")
            cache[rec.path] = img
        pairs.append(_pair_from_record(rec, cache[rec.path], lr_mode))
        manifest.append(rec)
    return PairDataset(pairs, manifest, split, lr_mode=lr_mode)


class BatchIterator:
    """Epoch-shuffled batches without replacement; the final short batch is
    dropped. Fully determined by (seed, epoch, cursor), so it can be
    checkpointed and resumed bitwise."""

    def __init__(self, dataset: PairDataset, batch_size: int = 10, seed: int = 0):
        if len(dataset) == 0:
            raise CorpusError("empty dataset")
        if batch_size > len(dataset):
            raise CorpusError(f"batch_size {batch_size} exceeds dataset size {len(dataset)}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self.cursor = 0
        self._perm = self._permutation(0)

    def _permutation(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(len(self.dataset))

    def next_indices(self) -> np.ndarray:
        if self.cursor + self.batch_size > len(self._perm):
            self.epoch += 1
            self.cursor = 0
            self._perm = self._permutation(self.epoch)
        out = self._perm[self.cursor : self.cursor + self.batch_size]
        self.cursor += self.batch_size
        return out

    def next_batch(self):
        return self.dataset.batch(self.next_indices())

    def state(self) -> dict:
        return {"seed": self.seed, "epoch": self.epoch, "cursor": self.cursor, "batch_size": self.batch_size}

    def restore(self, state: dict):
        self.seed = int(state["seed"])
        self.epoch = int(state["epoch"])
        self.cursor = int(state["cursor"])
        self.batch_size = int(state["batch_size"])
        self._perm = self._permutation(self.epoch)


def make_batches(dataset: PairDataset, batch_size: int = 10, seed: int = 0) -> BatchIterator:
    return BatchIterator(dataset, batch_size, seed)

"""Corpus loading, scaling, normalization and deterministic batching."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featsr.data import (
    BatchIterator,
    CorpusError,
    CropRecord,
    denormalize,
    downscale,
    load_corpus,
    load_manifest,
    make_batches,
    normalize,
)
from featsr.nn import DimensionError


# ---------------------------------------------------------------------------
# normalize / denormalize


def test_normalize_endpoints():
    np.testing.assert_allclose(normalize(np.array([0.0, 127.5, 255.0])), [-1.0, 0.0, 1.0])


def test_normalize_rejects_out_of_range():
    with pytest.raises(ValueError):
        normalize(np.array([256.0]))
    with pytest.raises(ValueError):
        normalize(np.array([-1.0]))


def test_denormalize_inverse_on_integers():
    v = np.arange(256, dtype=np.float64)
    np.testing.assert_array_equal(denormalize(normalize(v)), v.astype(np.uint8))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_denormalize_idempotent_second_pass(seed):
    img = np.random.default_rng(seed).uniform(-1, 1, (3, 4, 4))
    once = denormalize(img)
    twice = denormalize(normalize(once))
    np.testing.assert_array_equal(once, twice)


# ---------------------------------------------------------------------------
# downscale


@pytest.mark.parametrize("mode", ["bicubic", "average"])
def test_downscale_preserves_constants(mode):
    hr = np.full((3, 16, 16), 0.5, dtype=np.float32)
    out = downscale(hr, 4, mode)
    assert out.shape == (3, 4, 4)
    np.testing.assert_allclose(out, 0.5, atol=1e-6)


def test_downscale_average_block_mean_oracle():
    # per-quadrant 2x2 values {0, 0.2, 0.4, 0.6} -> 1x1 mean 0.3
    hr = np.zeros((1, 4, 4))
    hr[0, :2, :2] = 0.0
    hr[0, :2, 2:] = 0.2
    hr[0, 2:, :2] = 0.4
    hr[0, 2:, 2:] = 0.6
    np.testing.assert_allclose(downscale(hr, 4, "average"), [[[0.3]]], rtol=1e-7)


def test_downscale_shape_law():
    assert downscale(np.zeros((3, 8, 8)), 4, "average").shape == (3, 2, 2)


def test_downscale_rejects_bad_extents():
    with pytest.raises(DimensionError):
        downscale(np.zeros((3, 6, 8)), 4)


def test_downscale_average_preserves_global_mean():
    rng = np.random.default_rng(0)
    hr = rng.uniform(-1, 1, (3, 16, 16))
    np.testing.assert_allclose(downscale(hr, 4, "average").mean(), hr.mean(), rtol=1e-6)


def test_downscale_bicubic_mean_close():
    rng = np.random.default_rng(1)
    hr = rng.uniform(-1, 1, (3, 32, 32))
    assert abs(float(downscale(hr, 4, "bicubic").mean()) - float(hr.mean())) < 1e-3


# ---------------------------------------------------------------------------
# corpus loading


def test_load_corpus_shapes_and_manifest(toy_dir):
    ds = load_corpus(toy_dir, crop_size=32, crops_per_image=4, seed=0)
    assert len(ds) == 16
    for lr, hr in ds.pairs:
        assert lr.shape == (3, 8, 8) and hr.shape == (3, 32, 32)
        assert lr.min() >= -1.0 and hr.max() <= 1.0
    assert len(ds.manifest) == 16


def test_load_corpus_deterministic(toy_dir):
    a = load_corpus(toy_dir, crop_size=32, crops_per_image=2, seed=9)
    b = load_corpus(toy_dir, crop_size=32, crops_per_image=2, seed=9)
    assert [r.line() for r in a.manifest] == [r.line() for r in b.manifest]
    for (la, ha), (lb, hb) in zip(a.pairs, b.pairs):
        np.testing.assert_array_equal(ha, hb)
        np.testing.assert_array_equal(la, lb)


def test_load_corpus_rejects_crop_30(toy_dir):
    with pytest.raises(CorpusError):
        load_corpus(toy_dir, crop_size=30, crops_per_image=1, seed=0)


def test_load_corpus_missing_directory(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "nope", crop_size=32, crops_per_image=1, seed=0)


def test_load_corpus_skips_corrupt_files(toy_dir, tmp_path):
    import shutil

    for f in toy_dir.iterdir():
        shutil.copy(f, tmp_path / f.name)
    (tmp_path / "broken.png").write_bytes(b"not a png at all")
    with pytest.warns(UserWarning, match="broken"):
        ds = load_corpus(tmp_path, crop_size=32, crops_per_image=1, seed=0)
    assert len(ds) == 4


def test_labeled_corpus_directory_per_class(labeled_dir):
    ds = load_corpus(labeled_dir, crop_size=32, crops_per_image=1, seed=0)
    assert ds.has_labels
    assert ds.class_names == ["blobs", "stripes"]
    assert sorted(set(ds.labels)) == [0, 1]


def test_manifest_round_trip(toy_dir, tmp_path):
    ds = load_corpus(toy_dir, crop_size=32, crops_per_image=3, seed=4)
    path = tmp_path / "manifest.txt"
    ds.save_manifest(path)
    again = load_manifest(path)
    assert len(again) == len(ds)
    for (la, ha), (lb, hb) in zip(ds.pairs, again.pairs):
        np.testing.assert_array_equal(ha, hb)
        np.testing.assert_array_equal(la, lb)


def test_empty_manifest_rejected(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("\n")
    with pytest.raises(CorpusError):
        load_manifest(path)


def test_crop_record_parse_round_trip():
    rec = CropRecord("a/b.png", 3, 7, 32, 42)
    assert CropRecord.parse(rec.line()) == rec


# ---------------------------------------------------------------------------
# batching


def test_batches_per_epoch_floor(tiny_dataset):
    # 8 pairs, batch 3 -> 2 full batches per epoch, short batch dropped
    it = make_batches(tiny_dataset, 3, seed=0)
    seen = [it.next_indices().tolist() for _ in range(2)]
    flat = [i for b in seen for i in b]
    assert len(flat) == len(set(flat)) == 6


def test_batches_deterministic(tiny_dataset):
    a = make_batches(tiny_dataset, 3, seed=3)
    b = make_batches(tiny_dataset, 3, seed=3)
    for _ in range(7):
        np.testing.assert_array_equal(a.next_indices(), b.next_indices())


def test_batch_iterator_state_round_trip(tiny_dataset):
    it = make_batches(tiny_dataset, 3, seed=1)
    for _ in range(5):
        it.next_indices()
    snap = it.state()
    expected = [it.next_indices().tolist() for _ in range(4)]
    it2 = make_batches(tiny_dataset, 3, seed=1)
    it2.restore(snap)
    got = [it2.next_indices().tolist() for _ in range(4)]
    assert got == expected


def test_batch_size_exceeding_dataset_rejected(tiny_dataset):
    with pytest.raises(CorpusError):
        BatchIterator(tiny_dataset, batch_size=9)


def test_epoch_is_permutation(tiny_dataset):
    it = make_batches(tiny_dataset, 4, seed=2)
    epoch = sorted(it.next_indices().tolist() + it.next_indices().tolist())
    assert epoch == list(range(8))

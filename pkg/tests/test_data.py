"""Synthetic dataset invariants, the EBSD1 container round trip and its
three failure modes, pixel normalization, and the Bernoulli latent."""

import numpy as np
import pytest

from qwgan.data import (
    BadMagicError,
    ChecksumMismatchError,
    EbsdBatch,
    EbsdImage,
    LABEL_LEVELS,
    Phase,
    TruncatedPayloadError,
    bernoulli_latent,
    denormalize,
    load_dataset,
    normalize,
    save_channel_pngs,
    save_dataset,
    synth_dataset,
)


def random_batch(rng, n=4, size=8, phase=Phase.FERRITE):
    images = rng.integers(0, 256, size=(n, 5, size, size), dtype=np.uint8)
    return EbsdBatch(images=images, phase=phase)


class TestSynthDataset:
    def test_shapes_and_dtype(self):
        batch = synth_dataset(10, 16, 16, "ferrite", seed=0)
        assert batch.images.shape == (10, 5, 16, 16)
        assert batch.images.dtype == np.uint8
        assert batch.phase is Phase.FERRITE
        assert len(batch) == 10

    def test_deterministic(self):
        a = synth_dataset(100, 16, 16, Phase.FERRITE, seed=5)
        b = synth_dataset(100, 16, 16, Phase.FERRITE, seed=5)
        np.testing.assert_array_equal(a.images, b.images)

    def test_seed_changes_content(self):
        a = synth_dataset(5, 16, 16, "ferrite", seed=1)
        b = synth_dataset(5, 16, 16, "ferrite", seed=2)
        assert not np.array_equal(a.images, b.images)

    def test_mask_channel_is_bimodal(self):
        batch = synth_dataset(20, 16, 16, "ferrite", seed=3)
        values = np.unique(batch.images[:, 4])
        assert set(values.tolist()) <= {0, 255}
        assert 0 in values and 255 in values

    def test_label_channel_quantized(self):
        batch = synth_dataset(20, 16, 16, "bainite", seed=4)
        assert set(np.unique(batch.images[:, 1]).tolist()) <= set(LABEL_LEVELS)

    def test_boundary_misorientation_exceeds_interior(self):
        batch = synth_dataset(30, 16, 16, "ferrite", seed=6)
        boundary_vals, interior_vals = [], []
        for img in batch.images:
            mask = img[4] >= 128
            inner = mask & np.roll(mask, 1, 0) & np.roll(mask, -1, 0) \
                & np.roll(mask, 1, 1) & np.roll(mask, -1, 1)
            edge = mask & ~inner
            if edge.any():
                boundary_vals.append(img[2][edge].mean())
            if inner.any():
                interior_vals.append(img[2][inner].mean())
        assert np.mean(boundary_vals) > np.mean(interior_vals)

    def test_phase_styles_differ(self):
        a = synth_dataset(8, 16, 16, "ferrite", seed=7)
        b = synth_dataset(8, 16, 16, "bainite", seed=7)
        assert not np.array_equal(a.images, b.images)
        assert b.phase is Phase.BAINITE

    def test_size_validation(self):
        with pytest.raises(ValueError):
            synth_dataset(1, 4, 4, "ferrite", 0)
        with pytest.raises(ValueError):
            synth_dataset(1, 128, 128, "ferrite", 0)
        with pytest.raises(ValueError):
            synth_dataset(1, 16, 32, "ferrite", 0)
        with pytest.raises(ValueError):
            synth_dataset(0, 16, 16, "ferrite", 0)

    def test_unknown_phase_rejected(self):
        with pytest.raises(ValueError):
            synth_dataset(1, 16, 16, "austenite", 0)


class TestImageAndBatchTypes:
    def test_image_validation(self):
        with pytest.raises(ValueError):
            EbsdImage(np.zeros((3, 8, 8), dtype=np.uint8))
        with pytest.raises(ValueError):
            EbsdImage(np.zeros((5, 8, 8), dtype=np.float64))

    def test_batch_validation(self):
        with pytest.raises(ValueError):
            EbsdBatch(np.zeros((0, 5, 8, 8), dtype=np.uint8), Phase.FERRITE)

    def test_mask_threshold(self):
        arr = np.zeros((5, 8, 8), dtype=np.uint8)
        arr[4, 0, 0] = 200
        arr[4, 0, 1] = 100
        img = EbsdImage(arr)
        assert img.mask[0, 0] == 1 and img.mask[0, 1] == 0


class TestContainer:
    def test_round_trip_random_batches(self, tmp_path):
        rng = np.random.default_rng(10)
        for i in range(20):
            batch = random_batch(
                rng, n=int(rng.integers(1, 6)), size=int(rng.integers(8, 17)),
                phase=Phase.BAINITE if i % 2 else Phase.FERRITE,
            )
            path = tmp_path / f"b{i}.ebsd"
            save_dataset(batch, str(path))
            loaded = load_dataset(str(path))
            np.testing.assert_array_equal(loaded.images, batch.images)
            assert loaded.phase is batch.phase

    def test_file_is_byte_stable(self, tmp_path):
        batch = synth_dataset(3, 8, 8, "ferrite", seed=11)
        p1, p2 = tmp_path / "a.ebsd", tmp_path / "b.ebsd"
        save_dataset(batch, str(p1))
        save_dataset(batch, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ebsd"
        batch = random_batch(np.random.default_rng(12))
        save_dataset(batch, str(path))
        blob = bytearray(path.read_bytes())
        blob[0] = ord(b"X")
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            load_dataset(str(path))

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "cut.ebsd"
        save_dataset(random_batch(np.random.default_rng(13)), str(path))
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])
        with pytest.raises(TruncatedPayloadError):
            load_dataset(str(path))

    def test_checksum_mismatch(self, tmp_path):
        path = tmp_path / "flip.ebsd"
        save_dataset(random_batch(np.random.default_rng(14)), str(path))
        blob = bytearray(path.read_bytes())
        blob[-1] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumMismatchError):
            load_dataset(str(path))

    def test_error_types_are_distinct(self):
        assert not issubclass(BadMagicError, TruncatedPayloadError)
        assert not issubclass(TruncatedPayloadError, ChecksumMismatchError)
        assert not issubclass(ChecksumMismatchError, BadMagicError)


class TestNormalization:
    def test_endpoints(self):
        arr = np.array([[[[0]]], [[[255]]]], dtype=np.uint8).reshape(2, 1, 1, 1)
        out = normalize(arr)
        np.testing.assert_allclose(out.ravel(), [-1.0, 1.0], atol=1e-12)

    def test_round_trip_exhaustive_u8(self):
        values = np.arange(256, dtype=np.uint8).reshape(1, 1, 16, 16)
        np.testing.assert_array_equal(denormalize(normalize(values)), values)

    def test_batch_input(self):
        batch = synth_dataset(2, 8, 8, "ferrite", seed=15)
        out = normalize(batch)
        assert out.shape == batch.images.shape
        assert out.min() >= -1.0 and out.max() <= 1.0
        np.testing.assert_array_equal(denormalize(out), batch.images)

    def test_denormalize_clips(self):
        np.testing.assert_array_equal(
            denormalize(np.array([-2.0, 2.0])), np.array([0, 255], dtype=np.uint8)
        )


class TestBernoulliLatent:
    def test_values_and_shape(self):
        z = bernoulli_latent(12, 50, seed=0)
        assert z.shape == (50, 12)
        assert set(np.unique(z).tolist()) <= {0.0, 1.0}

    def test_deterministic(self):
        np.testing.assert_array_equal(bernoulli_latent(8, 10, 3),
                                      bernoulli_latent(8, 10, 3))

    def test_one_rate_near_half(self):
        z = bernoulli_latent(10, 10000, seed=1)
        assert abs(z.mean() - 0.5) < 0.01

    def test_validation(self):
        with pytest.raises(ValueError):
            bernoulli_latent(0, 5, 0)
        with pytest.raises(ValueError):
            bernoulli_latent(5, 0, 0)


class TestPngExport:
    def test_writes_five_files(self, tmp_path):
        pytest.importorskip("PIL")
        batch = synth_dataset(1, 8, 8, "ferrite", seed=16)
        paths = save_channel_pngs(batch[0], str(tmp_path), stem="t")
        assert len(paths) == 5
        from PIL import Image

        arr = np.asarray(Image.open(paths[4]))
        np.testing.assert_array_equal(arr, batch.images[0, 4])

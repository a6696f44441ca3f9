import gzip
import struct

import numpy as np
import pytest

from byzsgd.idx import (
    IdxFormatError,
    load_mnist_idx,
    read_idx_images,
    read_idx_labels,
    write_idx_images,
    write_idx_labels,
)

PIXELS = bytes(range(0, 256, 16)) * 4  # four 2x8 images, values 0..240


def _image_bytes(count=4, rows=2, cols=8, pixels=PIXELS):
    return b"\x00\x00\x08\x03" + struct.pack(">III", count, rows, cols) + pixels


def _label_bytes(labels=(3, 1, 4, 1)):
    return b"\x00\x00\x08\x01" + struct.pack(">I", len(labels)) + bytes(labels)


@pytest.fixture
def fixture_files(tmp_path):
    img, lab = tmp_path / "img", tmp_path / "lab"
    img.write_bytes(_image_bytes())
    lab.write_bytes(_label_bytes())
    return img, lab


class TestRead:
    def test_exact_pixels(self, fixture_files):
        ds = load_mnist_idx(*fixture_files)
        assert ds.images.shape == (4, 16)
        expected = np.frombuffer(PIXELS, dtype=np.uint8).reshape(4, 16) / 255.0
        np.testing.assert_array_equal(ds.images, expected)
        assert ds.labels.tolist() == [3, 1, 4, 1]

    def test_raw_shapes(self, fixture_files):
        assert read_idx_images(fixture_files[0]).shape == (4, 2, 8)
        assert read_idx_labels(fixture_files[1]).dtype == np.uint8

    def test_limit(self, fixture_files):
        ds = load_mnist_idx(*fixture_files, limit=2)
        assert len(ds) == 2
        assert ds.labels.tolist() == [3, 1]

    def test_swapped_files(self, fixture_files):
        with pytest.raises(IdxFormatError, match="bad magic 0x00000803"):
            read_idx_labels(fixture_files[0])

    def test_truncated(self, tmp_path):
        path = tmp_path / "short"
        path.write_bytes(_image_bytes()[:-3])
        with pytest.raises(IdxFormatError, match="truncated"):
            read_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "tiny"
        path.write_bytes(b"\x00\x00\x08")
        with pytest.raises(IdxFormatError, match="header"):
            read_idx_labels(path)

    def test_count_mismatch(self, tmp_path, fixture_files):
        lab = tmp_path / "lab3"
        lab.write_bytes(_label_bytes((1, 2, 3)))
        with pytest.raises(IdxFormatError, match="count mismatch"):
            load_mnist_idx(fixture_files[0], lab)

    def test_gzip_transparent(self, tmp_path):
        img = tmp_path / "img.gz"
        img.write_bytes(gzip.compress(_image_bytes()))
        np.testing.assert_array_equal(read_idx_images(img).ravel(), np.frombuffer(PIXELS, np.uint8))


class TestWrite:
    @pytest.mark.parametrize("name", ["a", "a.gz"])
    def test_roundtrip(self, tmp_path, name):
        imgs = np.random.default_rng(0).integers(0, 256, (3, 4, 5), dtype=np.uint8)
        labels = np.array([9, 0, 5], dtype=np.uint8)
        write_idx_images(tmp_path / ("i" + name), imgs)
        write_idx_labels(tmp_path / ("l" + name), labels)
        np.testing.assert_array_equal(read_idx_images(tmp_path / ("i" + name)), imgs)
        np.testing.assert_array_equal(read_idx_labels(tmp_path / ("l" + name)), labels)

    def test_plain_layout_is_byte_exact(self, tmp_path):
        write_idx_images(tmp_path / "img", np.frombuffer(PIXELS, np.uint8).reshape(4, 2, 8))
        assert (tmp_path / "img").read_bytes() == _image_bytes()

    def test_rejects_wrong_rank(self, tmp_path):
        with pytest.raises(ValueError):
            write_idx_images(tmp_path / "x", np.zeros((2, 2), dtype=np.uint8))

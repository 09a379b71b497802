import gzip
import itertools
import os
import struct
from pathlib import Path

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from gambler.data import (
    DatasetMeta,
    generate_blobs,
    load_idx,
    load_mnist,
    subset_split,
    write_idx,
)
from gambler.exceptions import ConsistencyError, FormatError, InvalidInputError, SizeError
from gambler.numerics import make_rng

MNIST_DIR = Path(os.environ.get("GMBL_MNIST_DIR", Path(__file__).resolve().parents[1] / "data" / "mnist"))


@pytest.fixture
def idx_pair(tmp_path):
    images = np.arange(2 * 3 * 2, dtype=np.uint8).reshape(2, 3, 2) * 20
    labels = np.array([7, 1], dtype=np.uint8)
    img, lab = tmp_path / "img-idx3-ubyte", tmp_path / "lab-idx1-ubyte"
    img.write_bytes(struct.pack(">IIII", 0x803, 2, 3, 2) + images.tobytes())
    lab.write_bytes(struct.pack(">II", 0x801, 2) + labels.tobytes())
    return img, lab, images, labels


class TestIdx:
    def test_hand_built_fixture(self, idx_pair):
        img, lab, images, labels = idx_pair
        ds = load_idx(img, lab)
        assert ds.X.shape == (2, 6)
        np.testing.assert_array_equal(ds.y, [7, 1])
        np.testing.assert_allclose(ds.X, images.reshape(2, 6) / 255.0, rtol=0, atol=0)

    def test_write_read_round_trip(self, tmp_path):
        rng = make_rng(0)
        images = rng.integers(0, 256, (5, 4, 4), dtype=np.uint8)
        labels = rng.integers(0, 10, 5, dtype=np.uint8)
        write_idx(tmp_path / "i", tmp_path / "l", images, labels)
        ds = load_idx(tmp_path / "i", tmp_path / "l")
        np.testing.assert_array_equal((ds.X * 255).round().astype(np.uint8), images.reshape(5, 16))

    def test_gzip_input(self, idx_pair, tmp_path):
        img, lab, _, _ = idx_pair
        gz = []
        for p in (img, lab):
            target = p.with_name(p.name + ".gz")
            target.write_bytes(gzip.compress(p.read_bytes()))
            gz.append(target)
        np.testing.assert_array_equal(load_idx(*gz).X, load_idx(img, lab).X)

    def test_swapped_magic(self, idx_pair):
        img, _, _, _ = idx_pair
        with pytest.raises(FormatError):
            load_idx(img, img)

    def test_count_mismatch(self, idx_pair, tmp_path):
        img, _, _, _ = idx_pair
        lab = tmp_path / "three"
        lab.write_bytes(struct.pack(">II", 0x801, 3) + bytes([0, 1, 2]))
        with pytest.raises(ConsistencyError):
            load_idx(img, lab)

    def test_label_above_num_classes(self, idx_pair):
        img, lab, _, _ = idx_pair
        with pytest.raises(ConsistencyError):
            load_idx(img, lab, num_classes=5)

    @pytest.mark.parametrize("keep", [2, 10, 20])
    def test_truncated(self, idx_pair, keep):
        img, lab, _, _ = idx_pair
        img.write_bytes(img.read_bytes()[:keep])
        with pytest.raises(OSError):
            load_idx(img, lab)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_mnist(tmp_path)

    @pytest.mark.skipif(not MNIST_DIR.exists(), reason="MNIST files not available")
    def test_real_mnist(self):
        train = load_mnist(MNIST_DIR, "train")
        test = load_mnist(MNIST_DIR, "t10k")
        assert train.X.shape == (60000, 784)
        assert test.X.shape == (10000, 784)
        assert train.X.min() == 0.0 and train.X.max() == 1.0
        assert set(np.unique(train.y)) == set(range(10))


class TestBlobs:
    def test_separable_at_large_separation(self):
        ds = generate_blobs(2000, 3, 2, 10.0, make_rng(1))
        clf = LogisticRegression(max_iter=1000).fit(ds.X, ds.y)
        assert clf.score(ds.X, ds.y) >= 0.99

    def test_balanced_labels(self):
        ds = generate_blobs(100, 2, 2, 2.0, make_rng(2))
        np.testing.assert_array_equal(np.bincount(ds.y), [50, 50])

    def test_deterministic(self):
        a = generate_blobs(300, 4, 3, 2.0, make_rng(3))
        b = generate_blobs(300, 4, 3, 2.0, make_rng(3))
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)

    @pytest.mark.parametrize("m, dim", [(2, 2), (3, 5), (6, 2), (10, 3)])
    def test_center_distances(self, m, dim):
        ds = generate_blobs(50, m, dim, 3.0, make_rng(4))
        centers = np.asarray(ds.info["centers"])
        for i, j in itertools.combinations(range(m), 2):
            assert np.linalg.norm(centers[i] - centers[j]) >= 3.0 - 1e-12

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            generate_blobs(10, 1, 2, 2.0, make_rng(0))
        with pytest.raises(InvalidInputError):
            generate_blobs(10, 2, 2, 0.0, make_rng(0))


class TestSplit:
    def test_sizes(self):
        ds = generate_blobs(12000, 2, 2, 2.0, make_rng(5))
        train, val, rest = subset_split(ds, 10000, 0.1, make_rng(6))
        assert (len(train), len(val), len(rest)) == (9000, 1000, 2000)

    def test_disjoint_and_deterministic(self):
        ds = generate_blobs(500, 2, 1, 2.0, make_rng(7))
        ds.X[:, 0] = np.arange(500)
        a = subset_split(ds, 400, 0.25, make_rng(8))
        b = subset_split(ds, 400, 0.25, make_rng(8))
        ids = [set(part.X[:, 0].astype(int)) for part in a]
        assert sum(len(s) for s in ids) == 500
        assert set.union(*ids) == set(range(500))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.X, y.X)

    def test_too_many_rows(self):
        ds = generate_blobs(10, 2, 2, 2.0, make_rng(0))
        with pytest.raises(SizeError):
            subset_split(ds, 11, 0.0, make_rng(0))


class TestMeta:
    def test_validation(self):
        DatasetMeta("mnist", 10, 60000, 10000, 784, "idx")
        with pytest.raises(InvalidInputError):
            DatasetMeta("x", 1, 10, 10, 2, "blobs")
        with pytest.raises(InvalidInputError):
            DatasetMeta("x", 2, 10, 10, 2, "csv")

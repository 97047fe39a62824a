import gzip
import os
import struct

import numpy as np
import pytest

from snsgan.datasets import (
    LabeledSeriesDataset,
    SyntheticSpec,
    denormalize,
    fit_normalizer,
    load_mnist_idx,
    load_ucr_dir,
    load_ucr_tsv,
    normalize,
    select_classes,
    synth_make,
    write_idx,
    write_ucr_tsv,
)
from snsgan.errors import ConfigError, ConsistencyError, DomainError, FormatError

MNIST012 = os.path.join(os.path.dirname(__file__), "data", "mnist012")
UCR_ROOT = os.environ.get("SNSGAN_UCR_DIR", "")


def write_text(path, text):
    path.write_text(text)
    return str(path)


def test_ucr_label_reindexing(tmp_path):
    p = write_text(tmp_path / "Toy_TRAIN.tsv", "9\t1.0\t2.0\n5\t3.0\t4.0\n")
    ds = load_ucr_tsv(p)
    assert ds.y.tolist() == [1, 0]
    assert ds.num_classes == 2 and ds.length == 2 and ds.name == "Toy"
    np.testing.assert_array_equal(ds.series, [[1.0, 2.0], [3.0, 4.0]])


def test_ucr_ragged_row_names_row(tmp_path):
    p = write_text(tmp_path / "r.tsv", "1\t0.5\t0.2\n2\t0.1\n")
    with pytest.raises(FormatError, match="row 2"):
        load_ucr_tsv(p)


def test_ucr_non_numeric_field(tmp_path):
    p = write_text(tmp_path / "n.tsv", "1\t0.5\tabc\n")
    with pytest.raises(FormatError, match="row 1"):
        load_ucr_tsv(p)


def test_ucr_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_ucr_tsv(str(tmp_path / "absent.tsv"))


def test_ucr_round_trip_with_test_split(tmp_path):
    rng = np.random.default_rng(0)
    x, xt = rng.normal(size=(6, 5)), rng.normal(size=(4, 5))
    os.makedirs(tmp_path / "Toy")
    write_ucr_tsv(tmp_path / "Toy" / "Toy_TRAIN.tsv", x, [-1, 1, 1, -1, 2, 2])
    write_ucr_tsv(tmp_path / "Toy" / "Toy_TEST.tsv", xt, [2, -1, 1, 1])
    ds = load_ucr_dir(tmp_path, "Toy")
    assert ds.x.tobytes() == x.tobytes() and ds.x_test.tobytes() == xt.tobytes()
    assert ds.y.tolist() == [0, 1, 1, 0, 2, 2] and ds.y_test.tolist() == [2, 0, 1, 1]
    write_ucr_tsv(tmp_path / "bad.tsv", xt, [7, 7, 7, 7])
    with pytest.raises(ConsistencyError):
        load_ucr_tsv(tmp_path / "Toy" / "Toy_TRAIN.tsv", tmp_path / "bad.tsv")


@pytest.mark.parametrize("name,n_classes,length,n_train", [
    ("SmoothSubspace", 3, 15, 150),
    ("FiftyWords", 50, 270, 450),
])
def test_ucr_archive_characteristics(name, n_classes, length, n_train):
    if not os.path.exists(os.path.join(UCR_ROOT, name, f"{name}_TRAIN.tsv")):
        pytest.skip(f"UCR file for {name} not available (set SNSGAN_UCR_DIR)")
    ds = load_ucr_dir(UCR_ROOT, name)
    assert (ds.num_classes, ds.length, len(ds.x)) == (n_classes, length, n_train)


def mnist_files(tmp_path, images, labels, suffix=""):
    ip, lp = str(tmp_path / f"img{suffix}"), str(tmp_path / f"lab{suffix}")
    write_idx(ip, images)
    write_idx(lp, labels)
    return ip, lp


def test_mnist_pixel_endpoints_and_shape(tmp_path):
    images = np.zeros((2, 28, 28), dtype=np.uint8)
    images[1] = 255
    ip, lp = mnist_files(tmp_path, images, np.array([3, 7], dtype=np.uint8))
    ds = load_mnist_idx(ip, lp)
    assert ds.images.shape == (2, 1, 28, 28)
    assert np.all(ds.x[0] == -1.0) and np.all(ds.x[1] == 1.0)
    assert ds.y.tolist() == [3, 7]


def test_mnist_gzip_matches_raw(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(3, 28, 28), dtype=np.uint8)
    labels = np.array([0, 1, 2], dtype=np.uint8)
    a = load_mnist_idx(*mnist_files(tmp_path, images, labels))
    b = load_mnist_idx(*mnist_files(tmp_path, images, labels, ".gz"))
    assert a.x.tobytes() == b.x.tobytes()


def test_mnist_bad_magic(tmp_path):
    ip, lp = mnist_files(tmp_path, np.zeros((1, 28, 28), np.uint8), np.zeros(1, np.uint8))
    with pytest.raises(FormatError, match="magic"):
        load_mnist_idx(lp, ip)


def test_mnist_truncated_is_rejected(tmp_path):
    ip, lp = mnist_files(tmp_path, np.zeros((4, 28, 28), np.uint8), np.zeros(4, np.uint8))
    with open(ip, "rb") as fh:
        raw = fh.read()
    with open(ip, "wb") as fh:
        fh.write(raw[:-10])
    with pytest.raises(FormatError):
        load_mnist_idx(ip, lp)
    gz = str(tmp_path / "trunc.gz")
    with open(gz, "wb") as fh:
        fh.write(gzip.compress(raw)[:-20])
    with pytest.raises(FormatError):
        load_mnist_idx(gz, lp)


def test_mnist_count_mismatch(tmp_path):
    ip, _ = mnist_files(tmp_path, np.zeros((3, 28, 28), np.uint8), np.zeros(3, np.uint8))
    _, lp = mnist_files(tmp_path, np.zeros((1, 28, 28), np.uint8), np.zeros(2, np.uint8), "b")
    with pytest.raises(ConsistencyError):
        load_mnist_idx(ip, lp)


def test_idx_header_bytes(tmp_path):
    p = str(tmp_path / "l")
    write_idx(p, np.array([1, 2], dtype=np.uint8))
    with open(p, "rb") as fh:
        assert fh.read() == struct.pack(">II", 0x801, 2) + b"\x01\x02"


def test_vendored_mnist_subset():
    d = MNIST012
    ds = load_mnist_idx(f"{d}/train-images-idx3-ubyte.gz", f"{d}/train-labels-idx1-ubyte.gz",
                        f"{d}/test-images-idx3-ubyte.gz", f"{d}/test-labels-idx1-ubyte.gz")
    assert ds.x.shape == (3000, 1, 28, 28) and ds.num_classes == 3
    assert set(np.unique(ds.y)) == {0, 1, 2}
    assert ds.x.min() == -1.0 and ds.x.max() == 1.0


def test_select_classes():
    x = np.arange(10.0)[:, None]
    ds = LabeledSeriesDataset(x, np.array([0, 1, 2, 3, 4] * 2), 5)
    sub = select_classes(ds, [3, 1], limit=3)
    assert sub.y.tolist() == [1, 0, 1] and sub.x[:, 0].tolist() == [1, 3, 6]
    assert sub.num_classes == 2


def test_synthetic_determinism_and_balance():
    spec = SyntheticSpec(num_classes=3, length=20, n_samples=31, n_test=9)
    a, b = synth_make(spec, 4), synth_make(spec, 4)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    counts = np.bincount(a.y)
    assert counts.max() - counts.min() <= 1
    assert a.x_test.shape == (9, 20)
    assert spec.class_frequencies() == (1.0, 3.0, 5.0)


def test_synthetic_noise_free_spectral_peak():
    spec = SyntheticSpec(num_classes=2, length=32, n_samples=50, noise_std=0.0)
    ds = synth_make(spec, 0)
    peak = np.abs(np.fft.rfft(ds.x, axis=1)).argmax(axis=1)
    predicted = np.where(peak == 1, 0, 1)
    assert np.all(peak[ds.y == 0] == 1) and np.all(peak[ds.y == 1] == 3)
    assert np.mean(predicted == ds.y) == 1.0


def test_synthetic_class_means_match_closed_form():
    spec = SyntheticSpec(num_classes=2, length=32, n_samples=2000, noise_std=0.3,
                         amplitudes=(0.8, 0.5), phases=(0.0, 1.0))
    ds = synth_make(spec, 1)
    t = np.arange(32)
    for k, (f, a, ph) in enumerate([(1, 0.8, 0.0), (3, 0.5, 1.0)]):
        rows = ds.x[ds.y == k]
        closed = a * np.sin(2 * np.pi * f * t / 32 + ph)
        assert np.all(np.abs(rows.mean(axis=0) - closed) < 3 * 0.3 / np.sqrt(len(rows)))


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(num_classes=2, frequencies=(1, 1))
    with pytest.raises(ConfigError):
        SyntheticSpec(noise_std=-1)


def test_minmax_affine_example():
    ds = LabeledSeriesDataset(np.array([[0.0, 5.0, 10.0]]), np.array([0]), 1,
                              x_test=np.array([[2.5, 12.5, 5.0]]), y_test=np.array([0]))
    out = normalize(ds)
    np.testing.assert_array_equal(out.x, [[-1.0, 0.0, 1.0]])
    # test split reuses the train-split map, so it may leave [-1, 1]
    np.testing.assert_array_equal(out.x_test, [[-0.5, 1.5, 0.0]])


def test_minmax_idempotent_on_unit_range(rng):
    x = rng.uniform(-1, 1, size=(5, 7))
    x[0, 0], x[1, 1] = -1.0, 1.0
    ds = LabeledSeriesDataset(x, np.zeros(5, int), 1)
    assert normalize(ds).x.tobytes() == x.tobytes()


@pytest.mark.parametrize("mode", ["minmax_pm1", "zscore"])
def test_normalize_round_trip(mode, rng):
    x = rng.normal(3, 7, size=(20, 9))
    xt = rng.normal(3, 7, size=(5, 9))
    ds = LabeledSeriesDataset(x, np.zeros(20, int), 1, x_test=xt, y_test=np.zeros(5, int))
    back = denormalize(normalize(ds, mode))
    assert np.max(np.abs(back.x - x)) < 1e-12 and np.max(np.abs(back.x_test - xt)) < 1e-12
    if mode == "zscore":
        z = normalize(ds, mode).x
        assert abs(z.mean()) < 1e-12 and abs(z.std() - 1) < 1e-12


def test_normalize_degenerate_and_unknown():
    ds = LabeledSeriesDataset(np.full((3, 4), 2.0), np.zeros(3, int), 1)
    with pytest.raises(DomainError):
        normalize(ds)
    with pytest.raises(ConfigError):
        fit_normalizer(np.arange(3.0), "robust")


def test_dataset_consistency_checks():
    with pytest.raises(ConsistencyError):
        LabeledSeriesDataset(np.zeros((3, 2)), np.zeros(2, int), 1)
    with pytest.raises(ConsistencyError):
        LabeledSeriesDataset(np.zeros((2, 2)), np.array([0, 2]), 2)

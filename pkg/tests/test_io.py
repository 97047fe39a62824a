import xml.etree.ElementTree as ET

import numpy as np
import pytest
from PIL import Image

from snsgan.errors import ConsistencyError, DomainError, FormatError
from snsgan.io import (
    image_grid,
    load_checkpoint,
    read_pgm,
    read_samples_csv,
    save_checkpoint,
    to_bytes,
    write_pgm,
    write_samples_csv,
    write_series_svg,
)

DIGEST = bytes(range(32))


def test_checkpoint_round_trip_is_byte_identical(tmp_path, rng):
    tensors = {"g.weight": rng.normal(size=(3, 4)), "g.bias": np.zeros(3), "scalar": np.array(2.5)}
    a, b = tmp_path / "a.snsg", tmp_path / "b.snsg"
    save_checkpoint(a, tensors, DIGEST, {"seed": 1, "config": "[x]\n"})
    loaded, digest, meta = load_checkpoint(a)
    assert digest == DIGEST and meta == {"seed": 1, "config": "[x]\n"}
    assert list(loaded) == list(tensors)
    np.testing.assert_array_equal(loaded["g.weight"], tensors["g.weight"].astype(np.float32))
    save_checkpoint(b, loaded, digest, meta)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes()[:5] == b"SNSG\x01"


def test_checkpoint_refuses_other_digest(tmp_path):
    p = tmp_path / "c.snsg"
    save_checkpoint(p, {"w": np.ones(2)}, DIGEST)
    with pytest.raises(ConsistencyError):
        load_checkpoint(p, expected_digest=bytes(32))
    assert load_checkpoint(p, expected_digest=DIGEST)[0]["w"].tolist() == [1.0, 1.0]


def test_checkpoint_malformed(tmp_path):
    p = tmp_path / "c.snsg"
    save_checkpoint(p, {"w": np.ones((4, 4))}, DIGEST)
    raw = p.read_bytes()
    (tmp_path / "t").write_bytes(raw[:-3])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(tmp_path / "t")
    (tmp_path / "m").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(tmp_path / "m")
    (tmp_path / "e").write_bytes(raw + b"\0")
    with pytest.raises(FormatError, match="trailing"):
        load_checkpoint(tmp_path / "e")
    (tmp_path / "v").write_bytes(raw[:4] + b"\x09" + raw[5:])
    with pytest.raises(FormatError, match="version"):
        load_checkpoint(tmp_path / "v")


def test_samples_csv_round_trip(tmp_path, rng):
    x = rng.normal(size=(5, 15))
    p = tmp_path / "s.csv"
    write_samples_csv(p, x, {"class": 2, "seed": 9})
    back, meta = read_samples_csv(p)
    assert back.tobytes() == x.tobytes()
    assert meta == {"class": "2", "seed": "9"}
    assert p.read_text().splitlines()[0] == "# class=2 seed=9"
    assert np.loadtxt(p, delimiter=",").shape == (5, 15)


def test_samples_csv_rejects_ragged(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(FormatError):
        read_samples_csv(p)


def test_pgm_parsed_by_reference_reader(tmp_path, rng):
    images = rng.uniform(-1, 1, size=(7, 1, 28, 28))
    grid = image_grid(images, columns=4)
    assert grid.shape == (2 * 30 + 2, 4 * 30 + 2)
    p = tmp_path / "g.pgm"
    write_pgm(p, grid, "class=1 seed=0")
    with Image.open(p) as im:
        assert im.format == "PPM" and im.mode == "L"
        np.testing.assert_array_equal(np.asarray(im), grid)
    raster, comments = read_pgm(p)
    np.testing.assert_array_equal(raster, grid)
    assert comments == ["class=1 seed=0"]
    np.testing.assert_array_equal(grid[2:30, 2:30], to_bytes(images[0, 0]))


def test_pgm_byte_mapping():
    assert to_bytes(np.array([-1.0, 0.0, 1.0])).tolist() == [0, 128, 255]


def test_pgm_reader_rejects_short_data(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P5\n4 4\n255\n" + b"\0" * 10)
    with pytest.raises(FormatError):
        read_pgm(p)


def test_svg_panels_and_point_counts(tmp_path, rng):
    p = tmp_path / "p.svg"
    panels = [(0, list(rng.normal(size=(3, 15))), list(rng.normal(size=(2, 15)))),
              (1, list(rng.normal(size=(3, 15))), [])]
    write_series_svg(p, panels)
    root = ET.parse(p).getroot()
    ns = {"s": "http://www.w3.org/2000/svg"}
    groups = root.findall("s:g[@class='panel']", ns)
    assert len(groups) == 2
    lines = root.findall(".//s:polyline", ns)
    assert len(lines) == 3 + 2 + 3
    assert all(len(pl.get("points").split()) == 15 for pl in lines)
    assert {pl.get("class") for pl in lines} == {"real", "generated"}
    texts = [t.text for t in root.iter("{http://www.w3.org/2000/svg}text")]
    assert "real" in texts and "generated" in texts and "time step" in texts and "value" in texts


def test_svg_empty_input():
    with pytest.raises(DomainError):
        write_series_svg("unused.svg", [])

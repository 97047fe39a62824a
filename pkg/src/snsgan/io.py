"""On-disk formats: binary checkpoints, sample CSVs, PGM image grids and SVG line plots."""
from __future__ import annotations

import csv
import json
import struct
import xml.etree.ElementTree as ET
from typing import Optional, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, FormatError

CHECKPOINT_MAGIC = b"SNSG"
CHECKPOINT_VERSION = 1


# -- checkpoints -------------------------------------------------------------------
#
# layout (little-endian):
#   "SNSG" | version u8 | sha256 config digest (32 bytes)
#   meta length u32 | meta JSON (utf-8, sorted keys)
#   tensor count u32 | per tensor: name length u16, name, ndim u8, dims u32 x ndim, float32 data


def save_checkpoint(path, tensors: dict, config_digest: bytes, meta: Optional[dict] = None) -> None:
    if len(config_digest) != 32:
        raise FormatError("config digest must be 32 bytes")
    meta_bytes = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [CHECKPOINT_MAGIC, struct.pack("<B", CHECKPOINT_VERSION), config_digest,
             struct.pack("<I", len(meta_bytes)), meta_bytes, struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        raw_name = name.encode("utf-8")
        array = np.asarray(array)
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack(f"<B{array.ndim}I", array.ndim, *array.shape))
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise FormatError(f"{self.path}: truncated checkpoint at byte {self.pos}")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path, expected_digest: Optional[bytes] = None) -> tuple:
    """Return (tensors, digest, meta).  Tensors come back as float64 arrays."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    (version,) = r.unpack("<B")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    found = r.take(32)
    if expected_digest is not None and found != expected_digest:
        raise ConsistencyError(f"{path}: checkpoint was written for a different configuration")
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata ({exc})") from None
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        dims = r.unpack(f"<{ndim}I")
        size = int(np.prod(dims)) if ndim else 1
        tensors[name] = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(dims).astype(np.float64)
    if r.pos != len(r.raw):
        raise FormatError(f"{path}: {len(r.raw) - r.pos} trailing bytes after the last tensor")
    return tensors, found, meta


# -- CSV ---------------------------------------------------------------------------


def write_samples_csv(path, samples: np.ndarray, meta: dict) -> None:
    """One sample per row after a single ``# key=value ...`` comment line."""
    samples = np.asarray(samples, dtype=np.float64)
    comment = " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in samples.reshape(len(samples), -1):
            writer.writerow([repr(float(v)) for v in row])


def read_samples_csv(path) -> tuple:
    meta, rows = {}, []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, value = item.partition("=")
                    meta[key] = value
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise FormatError(f"{path}: row {lineno}: non-numeric value") from None
    if rows and len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: rows differ in length")
    return np.array(rows, dtype=np.float64).reshape(len(rows), -1), meta


def write_table_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- PGM ---------------------------------------------------------------------------


def to_bytes(images: np.ndarray) -> np.ndarray:
    """[-1, 1] floats to 0..255 grey levels."""
    return np.clip(np.rint((np.asarray(images) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def image_grid(images: np.ndarray, columns: int = 10, pad: int = 2) -> np.ndarray:
    """Tile (n, 1, H, W) or (n, H, W) images into one byte raster with a black margin."""
    images = np.asarray(images)
    if images.ndim == 4:
        if images.shape[1] != 1:
            raise FormatError("PGM grids hold single-channel images only")
        images = images[:, 0]
    if images.ndim != 3 or len(images) == 0:
        raise DomainError("need at least one (H, W) image")
    n, h, w = images.shape
    cols = min(columns, n)
    rows = -(-n // cols)
    grid = np.zeros((rows * (h + pad) + pad, cols * (w + pad) + pad), dtype=np.uint8)
    tiles = to_bytes(images)
    for i in range(n):
        r, c = divmod(i, cols)
        y, x = pad + r * (h + pad), pad + c * (w + pad)
        grid[y:y + h, x:x + w] = tiles[i]
    return grid


def write_pgm(path, raster: np.ndarray, comment: str = "") -> None:
    raster = np.asarray(raster, dtype=np.uint8)
    height, width = raster.shape
    header = b"P5\n"
    if comment:
        header += b"# " + comment.encode("ascii") + b"\n"
    header += f"{width} {height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + raster.tobytes())


def read_pgm(path) -> tuple:
    """Parse a binary greyscale PGM; returns (raster, comments)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    pos, fields, comments = 0, [], []
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise FormatError(f"{path}: truncated PGM header")
        if raw[pos:pos + 1] == b"#":
            end = raw.index(b"\n", pos)
            comments.append(raw[pos + 1:end].decode("ascii").strip())
            pos = end + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos].decode("ascii"))
    if fields[0] != "P5":
        raise FormatError(f"{path}: not a binary PGM")
    width, height, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported")
    data = raw[pos + 1:]
    if len(data) != width * height:
        raise FormatError(f"{path}: expected {width * height} pixel bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width), comments


# -- SVG ---------------------------------------------------------------------------

REAL_STYLE = {"stroke": "#1f77b4", "stroke-opacity": "0.5", "fill": "none", "stroke-width": "1"}
FAKE_STYLE = {"stroke": "#d62728", "stroke-opacity": "0.7", "fill": "none", "stroke-width": "1",
              "stroke-dasharray": "4 2"}


def write_series_svg(path, panels: Sequence[tuple], panel_size=(320, 200), title: str = "") -> None:
    """One panel per ``(label, real_series, generated_series)``; either list may be empty."""
    if not panels or all(len(r) == 0 and len(g) == 0 for _, r, g in panels):
        raise DomainError("nothing to plot")
    pw, ph = panel_size
    margin, top = 40, 30
    width = margin + len(panels) * (pw + margin)
    height = top + ph + 70
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    if title:
        ET.SubElement(svg, "title").text = title
    everything = np.concatenate([np.asarray(s, dtype=np.float64).ravel()
                                 for _, r, g in panels for s in list(r) + list(g)])
    lo, hi = float(everything.min()), float(everything.max())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0

    for i, (label, real, fake) in enumerate(panels):
        x0 = margin + i * (pw + margin)
        g = ET.SubElement(svg, "g", attrib={"class": "panel", "data-label": str(label)})
        ET.SubElement(g, "rect", x=str(x0), y=str(top), width=str(pw), height=str(ph),
                      fill="none", stroke="#888888")
        ET.SubElement(g, "text", x=str(x0 + pw / 2), y=str(top - 10), attrib={"text-anchor": "middle"}).text = \
            f"class {label}"
        ET.SubElement(g, "text", x=str(x0 + pw / 2), y=str(top + ph + 20),
                      attrib={"text-anchor": "middle", "class": "axis-label"}).text = "time step"
        ET.SubElement(g, "text", x=str(x0 - 8), y=str(top + ph / 2),
                      attrib={"text-anchor": "middle", "class": "axis-label",
                              "transform": f"rotate(-90 {x0 - 8} {top + ph / 2})"}).text = "value"
        for kind, group, style in (("real", real, REAL_STYLE), ("generated", fake, FAKE_STYLE)):
            for series in group:
                series = np.asarray(series, dtype=np.float64).ravel()
                steps = max(len(series) - 1, 1)
                xs = x0 + np.arange(len(series)) * pw / steps
                ys = top + ph - (series - lo) / (hi - lo) * ph
                points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
                ET.SubElement(g, "polyline", points=points, attrib={"class": kind, **style})

    legend = ET.SubElement(svg, "g", attrib={"class": "legend"})
    ly = top + ph + 45
    for j, (name, style) in enumerate((("real", REAL_STYLE), ("generated", FAKE_STYLE))):
        lx = margin + j * 140
        ET.SubElement(legend, "line", x1=str(lx), y1=str(ly), x2=str(lx + 30), y2=str(ly), attrib=style)
        ET.SubElement(legend, "text", x=str(lx + 36), y=str(ly + 4)).text = name
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)

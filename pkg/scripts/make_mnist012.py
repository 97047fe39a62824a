"""Rebuild tests/data/mnist012 from the digit JSON files shipped in the npm ``mnist`` package.

Usage: python3 scripts/make_mnist012.py <path to package/src/digits> [out_dir]

Each ``{d}.json`` holds ``{"data": [...]}`` with 784 values per image in
[0, 1] (bytes divided by 255, rounded to three decimals), so rounding
``v * 255`` restores the original bytes.
"""
import json
import os
import sys

import numpy as np

from snsgan.datasets import write_idx

DIGITS = (0, 1, 2)
TRAIN_SIZE = 3000


def main(src, out):
    images, labels = [], []
    for d in DIGITS:
        with open(os.path.join(src, f"{d}.json")) as fh:
            flat = np.asarray(json.load(fh)["data"], dtype=np.float64)
        pix = np.clip(np.rint(flat * 255.0), 0, 255).astype(np.uint8).reshape(-1, 28, 28)
        images.append(pix)
        labels.append(np.full(len(pix), d, dtype=np.uint8))
    images, labels = np.concatenate(images), np.concatenate(labels)
    order = np.random.default_rng(0).permutation(len(images))
    images, labels = images[order], labels[order]
    os.makedirs(out, exist_ok=True)
    write_idx(os.path.join(out, "train-images-idx3-ubyte.gz"), images[:TRAIN_SIZE])
    write_idx(os.path.join(out, "train-labels-idx1-ubyte.gz"), labels[:TRAIN_SIZE])
    write_idx(os.path.join(out, "test-images-idx3-ubyte.gz"), images[TRAIN_SIZE:])
    write_idx(os.path.join(out, "test-labels-idx1-ubyte.gz"), labels[TRAIN_SIZE:])
    print(f"wrote {TRAIN_SIZE} train / {len(images) - TRAIN_SIZE} test images to {out}")


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    out = sys.argv[2] if len(sys.argv) > 2 else os.path.join(here, "..", "tests", "data", "mnist012")
    main(sys.argv[1], out)

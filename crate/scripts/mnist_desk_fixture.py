#!/usr/bin/env python3
"""Build a desk-scale MNIST fixture in IDX format from the `mnist` npm package.

The npm package ships roughly 1000 MNIST digits per class as JSON arrays of
pixel intensities scaled to [0, 1] and rounded to three decimals. This script
restores the u8 pixels, splits each class into train/test (first 80% train)
and writes the four standard IDX files:

    python3 scripts/mnist_desk_fixture.py <npm-package-dir> data/mnist-desk

Obtain the package with `npm pack mnist && tar xzf mnist-*.tgz`.
"""
import json
import os
import struct
import sys

SIZE = 28 * 28


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    pkg, out = sys.argv[1], sys.argv[2]
    os.makedirs(out, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        with open(os.path.join(pkg, "src", "digits", f"{digit}.json")) as f:
            raw = json.load(f)["data"]
        count = len(raw) // SIZE
        cut = (count * 4) // 5
        for k in range(count):
            px = [min(255, max(0, round(v * 255))) for v in raw[k * SIZE:(k + 1) * SIZE]]
            (train if k < cut else test).append((px, digit))
    for name, rows in (("train", train), ("t10k", test)):
        write_idx_images(os.path.join(out, f"{name}-images-idx3-ubyte"), [r[0] for r in rows])
        write_idx_labels(os.path.join(out, f"{name}-labels-idx1-ubyte"), [r[1] for r in rows])
    print(f"train={len(train)} test={len(test)} -> {out}")


if __name__ == "__main__":
    main()

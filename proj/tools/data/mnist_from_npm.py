#!/usr/bin/env python3
"""Convert the digit samples bundled with the npm `mnist` package into IDX files.

The npm package stores each class as a flat JSON array of pixel intensities
already divided by 255 and rounded to three decimals; round(v * 255) recovers
the original bytes exactly.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/data/mnist_from_npm.py package/src/digits data/mnist

Writes train-images-idx3-ubyte.gz / train-labels-idx1-ubyte.gz (9000 samples)
and t10k-images-idx3-ubyte.gz / t10k-labels-idx1-ubyte.gz (1000 samples).
The test split is proportional per class (largest remainder) and both splits
are shuffled with a fixed seed, so the output is reproducible.
"""

import argparse
import gzip
import json
import random
import struct
from pathlib import Path

SIDE = 28
PIXELS = SIDE * SIDE
TEST_COUNT = 1000
SHUFFLE_SEED = 20201223


def load_digits(digits_dir):
    samples = []
    for label in range(10):
        flat = json.loads((digits_dir / f"{label}.json").read_text())["data"]
        if len(flat) % PIXELS:
            raise ValueError(f"{label}.json: length {len(flat)} not a multiple of {PIXELS}")
        rows = [bytes(round(v * 255) for v in flat[i:i + PIXELS])
                for i in range(0, len(flat), PIXELS)]
        samples.append(rows)
    return samples


def test_quota(counts, total):
    n = sum(counts)
    exact = [c * total / n for c in counts]
    quota = [int(e) for e in exact]
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - quota[i]), i))
    for i in order[:total - sum(quota)]:
        quota[i] += 1
    return quota


def write_idx(path_images, path_labels, records):
    # gzip mtime pinned so reruns are byte-identical.
    with open(path_images, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(records), SIDE, SIDE))
        for image, _ in records:
            f.write(image)
    with open(path_labels, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(records)))
        f.write(bytes(label for _, label in records))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args()

    per_class = load_digits(args.digits_dir)
    quota = test_quota([len(rows) for rows in per_class], TEST_COUNT)

    train, test = [], []
    for label, rows in enumerate(per_class):
        test += [(img, label) for img in rows[:quota[label]]]
        train += [(img, label) for img in rows[quota[label]:]]

    rng = random.Random(SHUFFLE_SEED)
    rng.shuffle(train)
    rng.shuffle(test)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir / "train-images-idx3-ubyte.gz",
              args.out_dir / "train-labels-idx1-ubyte.gz", train)
    write_idx(args.out_dir / "t10k-images-idx3-ubyte.gz",
              args.out_dir / "t10k-labels-idx1-ubyte.gz", test)
    print(f"train={len(train)} test={len(test)} -> {args.out_dir}")


if __name__ == "__main__":
    main()

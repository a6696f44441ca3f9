"""Build the desk-scale MNIST IDX files used by the ``mnist-mlp`` task.

The full MNIST archives are often unreachable from sandboxed machines, so
this script takes the 5000-image MNIST sample that ships inside the
``mlxtend`` wheel (500 images per digit), shuffles it with a fixed seed and
writes a stratified 4000 / 1000 train / test split in gzip-compressed IDX
format next to this file.

If you do have the official archives, point the task's ``data_dir`` (or the
``BYZSGD_MNIST_DIR`` environment variable) at them instead.

    python data/prepare_mnist.py
"""

import argparse
import gzip
import io
from pathlib import Path

import numpy as np

from byzsgd.idx import write_idx_images, write_idx_labels


def load_mlxtend_sample():
    import mlxtend.data

    csv = Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
    table = np.loadtxt(io.StringIO(gzip.decompress(csv.read_bytes()).decode()), delimiter=",")
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).parent / "mnist")
    parser.add_argument("--test-per-class", type=int, default=100)
    parser.add_argument("--seed", type=int, default=2018)
    args = parser.parse_args()

    images, labels = load_mlxtend_sample()
    rng = np.random.default_rng(args.seed)
    test_rows, train_rows = [], []
    for digit in range(10):
        rows = rng.permutation(np.flatnonzero(labels == digit))
        test_rows.append(rows[: args.test_per_class])
        train_rows.append(rows[args.test_per_class:])
    train = rng.permutation(np.concatenate(train_rows))
    test = rng.permutation(np.concatenate(test_rows))

    args.out.mkdir(parents=True, exist_ok=True)
    for prefix, rows in (("train", train), ("t10k", test)):
        write_idx_images(args.out / f"{prefix}-images-idx3-ubyte.gz", images[rows].reshape(-1, 28, 28))
        write_idx_labels(args.out / f"{prefix}-labels-idx1-ubyte.gz", labels[rows])
        print(f"{prefix}: {len(rows)} images -> {args.out}")


if __name__ == "__main__":
    main()

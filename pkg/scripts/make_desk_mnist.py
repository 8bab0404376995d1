"""Build the bundled desk-scale MNIST fixtures.

Reads the 5000-image MNIST sample that ships inside the ``mlxtend`` wheel
(500 training-set digits per class, CSV with the label in the last column),
shuffles it with a fixed seed and writes two gzipped IDX image files:

    src/gmvae/data/mnist-desk-train-images-idx3-ubyte.gz   (4000 images)
    src/gmvae/data/mnist-desk-test-images-idx3-ubyte.gz    (1000 images)

Usage::

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_desk_mnist.py /tmp/mlx/mlxtend-*.whl
"""

import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from gmvae.data_io import IdxImageSet, serialize_idx

SEED = 20230401
N_TEST = 1000
OUT = Path(__file__).resolve().parents[1] / "src" / "gmvae" / "data"


def main(wheel):
    with zipfile.ZipFile(wheel) as zf:
        raw = zf.read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    pixels = table[:, :-1].astype(np.uint8)
    order = np.random.default_rng(SEED).permutation(len(pixels))
    pixels = pixels[order]
    splits = {"test": pixels[:N_TEST], "train": pixels[N_TEST:]}
    for name, block in splits.items():
        images = IdxImageSet(count=len(block), rows=28, cols=28, pixels=block)
        path = OUT / f"mnist-desk-{name}-images-idx3-ubyte.gz"
        # mtime=0 keeps the archive byte-stable across rebuilds
        with open(path, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
            gz.write(serialize_idx(images))
        print(f"{path.name}: {len(block)} images")


if __name__ == "__main__":
    main(sys.argv[1])

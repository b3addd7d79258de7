"""Build data/mnist5k IDX files from the 5000-image MNIST sample shipped in mlxtend.

The wheel is only used as a data carrier; it is not a runtime dependency.

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist5k.py /tmp/mlx/mlxtend-*.whl
"""

import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from bcpnn.dataio import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main(wheel):
    raw = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :784].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, 784].astype(np.uint8)
    out = Path(__file__).resolve().parents[1] / "data" / "mnist5k"
    out.mkdir(parents=True, exist_ok=True)
    write_idx(images, labels, out / "images-idx3-ubyte.gz", out / "labels-idx1-ubyte.gz")
    print(f"wrote {len(labels)} images to {out}")


if __name__ == "__main__":
    main(sys.argv[1])

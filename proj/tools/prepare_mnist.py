#!/usr/bin/env python3
"""Build MNIST IDX files from the digit sample bundled with the npm `mnist` package.

The package ships 10,000 digits as per-class JSON arrays of pixel/255 rounded
to three decimals; the original byte values are recovered exactly by
round(v * 255). Rows are interleaved with a fixed permutation so the output
file is not sorted by class.

    python3 tools/prepare_mnist.py [--package DIR] [--out data/mnist]

Without --package the script runs `npm pack mnist@1.1.0` in a temp dir.
"""
import argparse
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    with tarfile.open(workdir / "mnist-1.1.0.tgz") as tar:
        tar.extractall(workdir)
    return workdir / "package"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/mnist"))
    ap.add_argument("--seed", type=int, default=20220101)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        pkg = args.package or fetch_package(pathlib.Path(tmp))
        rows = []
        for digit in range(10):
            data = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
            assert len(data) % 784 == 0
            for i in range(0, len(data), 784):
                pixels = bytes(min(255, max(0, round(v * 255))) for v in data[i:i + 784])
                rows.append((pixels, digit))

    random.Random(args.seed).shuffle(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(pixels)
    with open(args.out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(rows)))
        f.write(bytes(label for _, label in rows))
    print(f"wrote {len(rows)} digits to {args.out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Convert image datasets into the formats the trainer reads.

Inputs:
  --pkl FILE   pickled (images, labels) tuple, {"images"/"x", "labels"/"y"} dict,
               or a bare image array. Images are uint8 [N,H,W], [N,C,H,W] or
               flattened [N,H*W] (square side assumed).
  --csv FILE   rows of H*W pixel bytes followed by an integer label.

Outputs:
  --format idx (default)  OUT.idx (magic 0x00000803) and OUT.labels.idx (0x00000801)
  --format gfd            OUT.gfd: "GFD1", u32 N,C,H,W little-endian, float32 in [-1,1]
"""

import argparse
import gzip
import math
import pickle
import struct
import sys

import numpy as np


def _open(path):
    return gzip.open(path, "rb") if path.endswith(".gz") else open(path, "rb")


def load_pkl(path):
    with _open(path) as f:
        obj = pickle.load(f, encoding="latin1")
    labels = None
    if isinstance(obj, dict):
        images = obj.get("images", obj.get("x"))
        labels = obj.get("labels", obj.get("y"))
    elif isinstance(obj, (tuple, list)):
        # (train, valid, test) splits of (x, y): take the first split
        if len(obj) == 3 and isinstance(obj[0], (tuple, list)):
            obj = obj[0]
        images, labels = obj[0], (obj[1] if len(obj) > 1 else None)
    else:
        images = obj
    return np.asarray(images), None if labels is None else np.asarray(labels)


def load_csv(path):
    with _open(path) as f:
        table = np.loadtxt(f, delimiter=",")
    table = np.atleast_2d(table)
    return table[:, :-1], table[:, -1].astype(np.int64)


def to_nchw_bytes(images):
    images = np.asarray(images)
    if images.dtype != np.uint8:
        lo, hi = float(images.min()), float(images.max())
        if hi <= 1.0 and lo >= 0.0:
            images = images * 255.0
        elif lo >= -1.0 and hi <= 1.0 and lo < 0.0:
            images = (images + 1.0) * 127.5
        images = np.clip(np.rint(images), 0, 255).astype(np.uint8)
    if images.ndim == 2:
        side = int(math.isqrt(images.shape[1]))
        if side * side != images.shape[1]:
            sys.exit(f"cannot infer square image side from {images.shape[1]} features")
        images = images.reshape(-1, 1, side, side)
    elif images.ndim == 3:
        images = images[:, None, :, :]
    elif images.ndim != 4:
        sys.exit(f"unsupported image array rank {images.ndim}")
    return images


def write_idx(prefix, images, labels):
    n, c, h, w = images.shape
    with open(prefix + ".idx", "wb") as f:
        if c == 1:
            f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        else:
            f.write(struct.pack(">IIIII", 0x00000804, n, c, h, w))
        f.write(images.tobytes())
    if labels is not None:
        with open(prefix + ".labels.idx", "wb") as f:
            f.write(struct.pack(">II", 0x00000801, len(labels)))
            f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def write_gfd(prefix, images):
    n, c, h, w = images.shape
    scaled = (images.astype(np.float32) / np.float32(255.0)) * np.float32(2.0) - np.float32(1.0)
    with open(prefix + ".gfd", "wb") as f:
        f.write(b"GFD1")
        f.write(struct.pack("<IIII", n, c, h, w))
        f.write(scaled.astype("<f4").tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--pkl")
    src.add_argument("--csv")
    ap.add_argument("--out", required=True, help="output path prefix (extension added)")
    ap.add_argument("--format", choices=["idx", "gfd"], default="idx")
    ap.add_argument("--limit", type=int, default=0, help="keep only the first N samples")
    args = ap.parse_args()

    images, labels = load_pkl(args.pkl) if args.pkl else load_csv(args.csv)
    images = to_nchw_bytes(images)
    if args.limit > 0:
        images = images[: args.limit]
        labels = None if labels is None else labels[: args.limit]
    if args.format == "idx":
        write_idx(args.out, images, labels)
    else:
        write_gfd(args.out, images)
    print(f"wrote {images.shape[0]} samples of shape {tuple(images.shape[1:])}")


if __name__ == "__main__":
    main()

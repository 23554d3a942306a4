#!/usr/bin/env python3
"""Dump a MATLAB scene (H x W x B cube or H x W labels) to little-endian raw.

Prints the matching `bandsel import` arguments. Example:

    python3 scripts/mat_to_raw.py Salinas_corrected.mat salinas_corrected sa.bin
    python3 scripts/mat_to_raw.py Salinas_gt.mat salinas_gt sa_gt.bin
"""

import argparse
import sys

import numpy as np
from scipy.io import loadmat


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("mat")
    parser.add_argument("key", help="variable name inside the .mat file")
    parser.add_argument("out")
    args = parser.parse_args()

    array = loadmat(args.mat)[args.key]
    if array.ndim == 3:
        dtype = {"uint16": "u16", "int16": "i16", "float32": "f32", "float64": "f64", "uint8": "u8"}
        kind = dtype.get(array.dtype.name)
        if kind is None:
            array, kind = array.astype("<f4"), "f32"
        height, width, bands = array.shape
        np.ascontiguousarray(array).astype(array.dtype.newbyteorder("<")).tofile(args.out)
        print(
            f"--raw {args.out} --width {width} --height {height} --bands {bands} "
            f"--dtype {kind} --interleave bip"
        )
    elif array.ndim == 2:
        height, width = array.shape
        np.ascontiguousarray(array).astype("<u2").tofile(args.out)
        print(f"--gt-raw {args.out} --gt-dtype u16   # {width} x {height}")
    else:
        print(f"unexpected shape {array.shape}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Freezes pycocotools compressed RLE strings for a few masks.

    python3 tests/oracles/rle_reference.py tests/data/rle_reference.json
"""

import json
import sys

import numpy as np
from pycocotools import mask as mask_utils


def main():
    rng = np.random.default_rng(3)
    cases = []
    shapes = [(4, 5, 0.5), (7, 3, 0.3), (40, 60, 0.5), (1, 1, 1.0), (3, 3, 0.0), (64, 48, 0.97)]
    for h, w, p in shapes:
        m = (rng.random((h, w)) < p).astype(np.uint8)
        cases.append((h, w, m))
    m = np.zeros((100, 120), np.uint8)
    m[10:90, 20:100] = 1
    cases.append((100, 120, m))
    out = []
    for h, w, m in cases:
        rle = mask_utils.encode(np.asfortranarray(m))
        out.append({"height": h, "width": w,
                    "rows": ["".join(str(v) for v in row) for row in m],
                    "counts": rle["counts"].decode("ascii"),
                    "area": int(mask_utils.area(rle)),
                    "bbox": [int(v) for v in mask_utils.toBbox(rle)]})
    with open(sys.argv[1], "w") as f:
        json.dump({"cases": out}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()

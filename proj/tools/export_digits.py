#!/usr/bin/env python3
"""Write the scikit-learn digits dataset (bundled with the package, no
download) as CSV: 64 pixel columns p0..p63 followed by the label."""

import csv
import sys


def main() -> int:
    if len(sys.argv) != 2:
        print("usage: export_digits.py <out.csv>", file=sys.stderr)
        return 2
    try:
        from sklearn.datasets import load_digits
    except ImportError:
        print("scikit-learn is not installed", file=sys.stderr)
        return 1
    digits = load_digits()
    with open(sys.argv[1], "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"p{i}" for i in range(64)] + ["label"])
        for row, label in zip(digits.data, digits.target):
            w.writerow([int(v) for v in row] + [int(label)])
    return 0


if __name__ == "__main__":
    sys.exit(main())

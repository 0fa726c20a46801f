#!/usr/bin/env python3
"""Materialize the bundled 8x8 digits data as a CSV in the loader's format.

Usage: python scripts/make_dataset.py [path]

Pass the path to real UCI optdigits files to the experiment CLI instead if
you have them; this script only covers the offline desk-scale default.
"""

import sys

from fedeval.data import write_demo_digits_csv

if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "data/digits.csv"
    print(f"wrote {write_demo_digits_csv(target)}")

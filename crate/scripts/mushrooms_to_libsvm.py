#!/usr/bin/env python3
"""Convert the UCI agaricus-lepiota.data file into one-hot LIBSVM text.

Usage: mushrooms_to_libsvm.py agaricus-lepiota.data > data/mushrooms.libsvm

Label "1" is edible, "2" is poisonous. Each categorical attribute value that
occurs in the data becomes one binary feature; attributes are laid out in file
order with values sorted within an attribute. Missing values ("?") are kept as
their own category.
"""
import csv
import sys


def main(path):
    rows = list(csv.reader(open(path)))
    n_attr = len(rows[0]) - 1
    index = {}
    for a in range(n_attr):
        for v in sorted({r[a + 1] for r in rows}):
            index[(a, v)] = len(index) + 1
    out = sys.stdout
    for r in rows:
        label = "1" if r[0] == "e" else "2"
        idx = sorted(index[(a, r[a + 1])] for a in range(n_attr))
        out.write(label + " " + " ".join(f"{i}:1" for i in idx) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])

#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert a Planetoid citation dataset (Cora, CiteSeer, PubMed) to the gdkm layout.

Input is the directory holding the raw files ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}.
The standard split is kept: the first 20 labelled nodes per class for training (the rows of y),
the next 500 for validation and the 1000 test.index nodes for testing.

    python3 tools/planetoid_to_gdkm.py --raw planetoid/data --name cora --out data/cora
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_raw(raw: Path, name: str):
    objects = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        with open(raw / f"ind.{name}.{key}", "rb") as f:
            objects[key] = pickle.load(f, encoding="latin1")
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    return objects, test_index


def assemble(objects, test_index):
    tx, ty = objects["tx"], objects["ty"]
    sorted_test = np.sort(test_index)
    if tx.shape[0] != sorted_test[-1] - sorted_test[0] + 1:
        # CiteSeer has isolated test nodes without features; pad them with zeros.
        full = range(sorted_test[0], sorted_test[-1] + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[sorted_test - sorted_test[0], :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[sorted_test - sorted_test[0], :] = ty
        tx, ty = tx_ext, ty_ext

    features = sp.vstack((objects["allx"], tx)).tolil()
    features[test_index, :] = features[sorted_test, :]
    labels = np.vstack((objects["ally"], ty))
    labels[test_index, :] = labels[sorted_test, :]

    n = features.shape[0]
    edges = set()
    for u, neighbors in objects["graph"].items():
        for v in neighbors:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    n_train = objects["y"].shape[0]
    split = {
        "train": list(range(n_train)),
        "val": list(range(n_train, n_train + 500)),
        "test": sorted(int(i) for i in test_index if i < n),
    }
    return np.asarray(features.todense()), labels.argmax(axis=1), sorted(edges), split


def write(out: Path, features, labels, edges, split):
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "features.csv", features, delimiter=",", fmt="%.9g")
    np.savetxt(out / "labels.csv", labels, fmt="%d")
    with open(out / "edges.txt", "w") as f:
        f.write("# u v\n")
        for u, v in edges:
            f.write(f"{u} {v}\n")
    (out / "splits.json").write_text(json.dumps(split))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--raw", type=Path, required=True, help="directory with the ind.<name>.* files")
    ap.add_argument("--name", default="cora")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()
    try:
        objects, test_index = load_raw(args.raw, args.name)
    except FileNotFoundError as e:
        sys.exit(f"missing raw file: {e.filename}")
    features, labels, edges, split = assemble(objects, test_index)
    write(args.out, features, labels, edges, split)
    print(f"{args.name}: {features.shape[0]} nodes, {len(edges)} edges, {features.shape[1]} features, "
          f"{labels.max() + 1} classes -> {args.out}")


if __name__ == "__main__":
    main()

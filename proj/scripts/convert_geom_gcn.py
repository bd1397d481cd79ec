#!/usr/bin/env python3
"""Convert a Geom-GCN style dataset directory to the chatgnn dataset format.

Expected inputs, as distributed for the WebKB graphs (texas, wisconsin, cornell):

  <raw>/out1_graph_edges.txt          header line, then "src<TAB>dst" per edge
  <raw>/out1_node_feature_label.txt   header line, then "id<TAB>f1,f2,...<TAB>label"
  <splits>/<name>_split_0.6_0.2_<k>.npz   boolean train_mask / val_mask / test_mask

Field mapping:
  node ids        -> row indices (ids must be 0..N-1)
  edges           -> "edges"; self-loops and duplicates are dropped by the loader
  feature vector  -> "features" row, raw counts with "normalize_features": true
  label           -> "labels"; "num_classes" is max(label) + 1
  masks of split k-> "splits"[k] as sorted node-index lists
"""

import argparse
import json
import pathlib
import sys

import numpy as np


def read_features(path):
    rows = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            node, feats, label = line.rstrip("\n").split("\t")
            rows[int(node)] = ([float(x) for x in feats.split(",")], int(label))
    n = len(rows)
    if sorted(rows) != list(range(n)):
        sys.exit(f"{path}: node ids are not 0..{n - 1}")
    return [rows[i][0] for i in range(n)], [rows[i][1] for i in range(n)]


def read_edges(path):
    edges = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            u, v = line.split()
            edges.append([int(u), int(v)])
    return edges


def read_splits(split_dir, name):
    files = sorted(pathlib.Path(split_dir).glob(f"{name}_split_0.6_0.2_*.npz"),
                   key=lambda p: int(p.stem.rsplit("_", 1)[1]))
    if not files:
        sys.exit(f"no split files for {name} in {split_dir}")
    splits = []
    for f in files:
        z = np.load(f)
        splits.append({part: np.flatnonzero(z[f"{part}_mask"]).tolist()
                       for part in ("train", "val", "test")})
    return splits


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--name", required=True, help="dataset name, e.g. texas")
    ap.add_argument("--raw", required=True, help="directory with out1_*.txt")
    ap.add_argument("--splits", required=True, help="directory with the split .npz files")
    ap.add_argument("--out", required=True, help="output JSON path")
    ap.add_argument("--directed", action="store_true", help="keep arcs directed")
    args = ap.parse_args()

    raw = pathlib.Path(args.raw)
    features, labels = read_features(raw / "out1_node_feature_label.txt")
    doc = {
        "format": "chatgnn-dataset",
        "version": 1,
        "name": args.name,
        "num_nodes": len(labels),
        "num_classes": max(labels) + 1,
        "directed": args.directed,
        "normalize_features": True,
        "edges": read_edges(raw / "out1_graph_edges.txt"),
        "features": features,
        "labels": labels,
        "splits": read_splits(args.splits, args.name),
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh)
    print(f"{args.name}: {doc['num_nodes']} nodes, {len(doc['edges'])} edges, "
          f"{doc['num_classes']} classes, {len(doc['splits'])} splits -> {args.out}")


if __name__ == "__main__":
    main()

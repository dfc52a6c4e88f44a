#!/usr/bin/env python3
"""Convert a LINQS-style citation dataset (<name>.content / <name>.cites) into
the directory layout read by `herb::graph::load_dataset`:

    <out>/edges.txt     one "u v" pair per line (0-based node ids)
    <out>/features.csv  header "node,x0,...,x{f-1}", one row per node
    <out>/labels.csv    header "node,label", class indices assigned in sorted
                        order of the class names

Usage: linqs_to_herb.py <content> <cites> <out_dir>
"""
import os
import sys


def main(content, cites, out):
    ids, feats, names = [], [], []
    with open(content) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            feats.append(parts[1:-1])
            names.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = {c: k for k, c in enumerate(sorted(set(names)))}
    os.makedirs(out, exist_ok=True)
    dim = len(feats[0])
    with open(os.path.join(out, "features.csv"), "w") as fh:
        fh.write("node," + ",".join(f"x{j}" for j in range(dim)) + "\n")
        for i, row in enumerate(feats):
            fh.write(f"{i}," + ",".join(row) + "\n")
    with open(os.path.join(out, "labels.csv"), "w") as fh:
        fh.write("node,label\n")
        for i, name in enumerate(names):
            fh.write(f"{i},{classes[name]}\n")
    skipped = 0
    with open(cites) as fh, open(os.path.join(out, "edges.txt"), "w") as oh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] not in index or parts[1] not in index:
                skipped += 1
                continue
            oh.write(f"{index[parts[1]]} {index[parts[0]]}\n")
    print(f"{len(ids)} nodes, {dim} features, {len(classes)} classes, {skipped} dangling citations skipped")


if __name__ == "__main__":
    main(*sys.argv[1:4])

#!/usr/bin/env python3
"""Convert ChaLearn-style keypoint exports into a ringres dataset manifest.

Expected input layout::

    ROOT/
      labels.csv               one "sample_id,label" row per video (no header)
      <sample_id>/             one directory per video
        *_keypoints.json       one JSON per frame, OpenPose export format

Each frame JSON must contain ``people[0]["pose_keypoints_2d"]``, a flat
[x0, y0, c0, x1, y1, c1, ...] list.  Confidence values are dropped, so a
K-keypoint skeleton becomes 2*K channels per timestep.  Frames are ordered
by filename.  Frames with no detected person become all-zero rows, and the
keypoint count is taken from the first non-empty frame of the first sample.

Labels may be arbitrary strings; they are mapped to class indices in sorted
order and the mapping is printed.  Output is a manifest plus one CSV per
sample, readable by ``ringres.data.load_dataset`` and usable as the
``dataset.manifest`` of a spec file.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ringres.data import TaskSpec, make_dataset, save_dataset


def frame_row(path, n_coords):
    people = json.loads(path.read_text()).get("people", [])
    if not people:
        return np.zeros(n_coords)
    flat = np.asarray(people[0]["pose_keypoints_2d"], dtype=float)
    coords = flat.reshape(-1, 3)[:, :2].ravel()
    if coords.size != n_coords:
        raise SystemExit(
            f"{path}: expected {n_coords // 2} keypoints, got {coords.size // 2}"
        )
    return coords


def detect_n_coords(sample_dir):
    for path in sorted(sample_dir.glob("*_keypoints.json")):
        people = json.loads(path.read_text()).get("people", [])
        if people:
            return len(people[0]["pose_keypoints_2d"]) // 3 * 2
    raise SystemExit(f"{sample_dir}: no frame with a detected person")


def read_labels(root):
    rows = []
    with open(root / "labels.csv", newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if len(row) != 2:
                raise SystemExit(f"labels.csv: expected 'sample_id,label', got {row!r}")
            rows.append((row[0].strip(), row[1].strip()))
    if not rows:
        raise SystemExit("labels.csv is empty")
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("root", type=Path, help="directory holding labels.csv and per-video subdirectories")
    parser.add_argument("--out", type=Path, required=True, help="output directory for manifest.json")
    args = parser.parse_args(argv)

    labeled = read_labels(args.root)
    classes = sorted({label for _, label in labeled})
    if len(classes) < 2:
        raise SystemExit(f"need >= 2 classes, labels.csv has {classes}")
    index = {label: i for i, label in enumerate(classes)}

    n_coords = detect_n_coords(args.root / labeled[0][0])
    series_list, targets = [], []
    for sample_id, label in labeled:
        sample_dir = args.root / sample_id
        frames = sorted(sample_dir.glob("*_keypoints.json"))
        if not frames:
            raise SystemExit(f"{sample_dir}: no *_keypoints.json frames")
        series_list.append(np.stack([frame_row(f, n_coords) for f in frames]))
        targets.append(index[label])

    task = TaskSpec(kind="classification", n_classes=len(classes))
    ds = make_dataset(task, n_coords, series_list, targets)
    manifest = args.out / "manifest.json"
    save_dataset(ds, manifest)

    print(f"wrote {len(ds.samples)} samples, {n_coords} channels, to {manifest}")
    for label, i in index.items():
        print(f"class {i}: {label}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

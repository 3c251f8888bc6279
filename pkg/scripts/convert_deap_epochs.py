#!/usr/bin/env python3
"""Convert DEAP per-participant recordings into a ringres dataset manifest.

Input files are the preprocessed per-participant pickles (``s01.dat`` ...),
each a dict with ``data`` shaped (trials, channels, timesteps) and
``labels`` shaped (trials, label_dims).  Pickles written by Python 2 load
fine; they are read with latin1 encoding.

Every trial is cut into consecutive non-overlapping windows of
``--epoch-length`` timesteps (the tail remainder is dropped).  Each window
becomes one regression sample whose target is the trial's rating in
``--label-column`` (default 1).  Axes are transposed so a sample's series
is (timesteps, channels).  Output is a manifest plus one CSV per sample,
readable by ``ringres.data.load_dataset``; point a spec file's
``dataset.manifest`` at it and set ``length_policy: fixed`` with
``fixed_length`` equal to the epoch length.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np

from ringres.data import TaskSpec, make_dataset, save_dataset


def load_participant(path):
    with open(path, "rb") as fh:
        raw = pickle.load(fh, encoding="latin1")
    try:
        data = np.asarray(raw["data"], dtype=float)
        labels = np.asarray(raw["labels"], dtype=float)
    except (TypeError, KeyError):
        raise SystemExit(f"{path}: expected a dict with 'data' and 'labels'")
    if data.ndim != 3 or labels.ndim != 2 or data.shape[0] != labels.shape[0]:
        raise SystemExit(
            f"{path}: expected data (trials, channels, T) and labels (trials, dims), "
            f"got {data.shape} and {labels.shape}"
        )
    return data, labels


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("files", type=Path, nargs="+", help="per-participant .dat pickles")
    parser.add_argument("--out", type=Path, required=True, help="output directory for manifest.json")
    parser.add_argument("--epoch-length", type=int, default=134, help="timesteps per sample")
    parser.add_argument("--label-column", type=int, default=1, help="labels column used as regression target")
    args = parser.parse_args(argv)
    if args.epoch_length < 1:
        raise SystemExit("--epoch-length must be >= 1")

    series_list, targets = [], []
    n_channels = None
    for path in args.files:
        data, labels = load_participant(path)
        if args.label_column >= labels.shape[1]:
            raise SystemExit(
                f"{path}: --label-column {args.label_column} out of range "
                f"for labels with {labels.shape[1]} columns"
            )
        if n_channels is None:
            n_channels = data.shape[1]
        elif data.shape[1] != n_channels:
            raise SystemExit(
                f"{path}: {data.shape[1]} channels, earlier files had {n_channels}"
            )
        n_epochs = data.shape[2] // args.epoch_length
        if n_epochs == 0:
            raise SystemExit(
                f"{path}: trials are shorter than --epoch-length {args.epoch_length}"
            )
        for trial in range(data.shape[0]):
            rating = labels[trial, args.label_column]
            for k in range(n_epochs):
                window = data[trial, :, k * args.epoch_length:(k + 1) * args.epoch_length]
                series_list.append(window.T.copy())
                targets.append(np.array([rating]))

    task = TaskSpec(kind="regression", target_dim=1)
    ds = make_dataset(task, n_channels, series_list, targets)
    manifest = args.out / "manifest.json"
    save_dataset(ds, manifest)
    print(
        f"wrote {len(ds.samples)} samples ({n_channels} channels, "
        f"{args.epoch_length} timesteps each) to {manifest}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

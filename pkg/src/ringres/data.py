"""Datasets of labeled sequences: file format, normalization, splits, generators.

A dataset on disk is a JSON manifest next to one CSV file per sample
(rows are timesteps, columns are channels, no header):

    {
      "format": "ringres-dataset/v1",
      "task": {"kind": "classification", "classes": 2},
      "channels": 1,
      "samples": [{"series": "series_0000.csv", "target": 1}, ...]
    }

Regression manifests use {"kind": "regression", "target_dim": B} and list
targets as arrays of B reals. The two synthetic generators (delayed-XOR
classification, NARMA-10 regression) exist so the full pipeline can be
exercised at desk scale with known statistics.
"""

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DatasetError

MANIFEST_FORMAT = "ringres-dataset/v1"
TASK_KINDS = ("classification", "regression")
NARMA_DIVERGENCE_LIMIT = 1e3
NARMA_MAX_REDRAWS = 10


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    n_classes: int = 0
    target_dim: int = 0

    def __post_init__(self):
        if self.kind == "classification":
            if self.n_classes < 2:
                raise ValueError(
                    f"classification needs >= 2 classes, got {self.n_classes}"
                )
        elif self.kind == "regression":
            if self.target_dim < 1:
                raise ValueError(
                    f"regression needs target_dim >= 1, got {self.target_dim}"
                )
        else:
            raise ValueError(f"task kind must be one of {TASK_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class Sample:
    series: np.ndarray  # (T, A)
    target: object  # int class index or (B,) float vector


@dataclass(frozen=True)
class Dataset:
    task: TaskSpec
    n_channels: int
    samples: tuple
    channel_bounds: np.ndarray = None  # (A, 2) train-split min/max, once normalized

    def __len__(self):
        return len(self.samples)

    def sequences(self):
        return [s.series for s in self.samples]

    def targets(self):
        if self.task.kind == "classification":
            return np.array([s.target for s in self.samples], dtype=np.int64)
        return np.array([s.target for s in self.samples], dtype=np.float64)


def _check_series(series, n_channels, where):
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2 or series.shape[0] < 1:
        raise DatasetError(f"{where}: series must be a nonempty 2-D array")
    if series.shape[1] != n_channels:
        raise DatasetError(
            f"{where}: has {series.shape[1]} channels, expected {n_channels}"
        )
    if not np.all(np.isfinite(series)):
        raise DatasetError(f"{where}: series contains non-finite values")
    return series


def make_dataset(task, n_channels, series_list, targets):
    """Assemble and validate a Dataset from in-memory parts."""
    if len(series_list) != len(targets):
        raise DatasetError(
            f"{len(series_list)} series but {len(targets)} targets"
        )
    if len(series_list) == 0:
        raise DatasetError("dataset has no samples")
    samples = []
    for i, (series, target) in enumerate(zip(series_list, targets)):
        series = _check_series(series, n_channels, f"sample {i}")
        if task.kind == "classification":
            target = int(target)
            if not 0 <= target < task.n_classes:
                raise DatasetError(
                    f"sample {i}: class {target} outside [0, {task.n_classes})"
                )
        else:
            target = np.asarray(target, dtype=np.float64).reshape(-1)
            if target.shape[0] != task.target_dim:
                raise DatasetError(
                    f"sample {i}: target has length {target.shape[0]}, "
                    f"expected {task.target_dim}"
                )
        samples.append(Sample(series=series, target=target))
    return Dataset(task=task, n_channels=n_channels, samples=tuple(samples))


def _task_from_manifest(obj, path):
    kind = obj.get("kind")
    try:
        if kind == "classification":
            return TaskSpec(kind="classification", n_classes=int(obj["classes"]))
        if kind == "regression":
            return TaskSpec(kind="regression", target_dim=int(obj["target_dim"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: malformed task block: {exc}") from exc
    raise DatasetError(f"{path}: unknown task kind {kind!r}")


def load_dataset(manifest_path):
    """Read a manifest and every series file it references."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise DatasetError(
            f"{manifest_path}: missing format tag {MANIFEST_FORMAT!r}"
        )
    task = _task_from_manifest(manifest.get("task", {}), manifest_path)
    try:
        n_channels = int(manifest["channels"])
        entries = manifest["samples"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{manifest_path}: malformed manifest: {exc}") from exc
    if not entries:
        raise DatasetError(f"{manifest_path}: manifest lists no samples")
    root = manifest_path.parent
    series_list, targets = [], []
    for i, entry in enumerate(entries):
        try:
            rel = entry["series"]
            target = entry["target"]
        except (KeyError, TypeError) as exc:
            raise DatasetError(
                f"{manifest_path}: sample {i} is malformed: {exc}"
            ) from exc
        series_path = root / rel
        if not series_path.is_file():
            raise DatasetError(f"series file not found: {series_path}")
        try:
            series = np.loadtxt(series_path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DatasetError(f"{series_path}: unreadable CSV: {exc}") from exc
        series_list.append(_check_series(series, n_channels, str(series_path)))
        targets.append(target)
    return make_dataset(task, n_channels, series_list, targets)


def save_dataset(ds, manifest_path):
    """Write the manifest and one CSV per sample beside it."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, sample in enumerate(ds.samples):
        rel = f"series_{i:04d}.csv"
        # 17 significant digits round-trips float64 exactly
        np.savetxt(manifest_path.parent / rel, sample.series, delimiter=",", fmt="%.17g")
        if ds.task.kind == "classification":
            target = int(sample.target)
        else:
            target = [float(v) for v in sample.target]
        entries.append({"series": rel, "target": target})
    if ds.task.kind == "classification":
        task_obj = {"kind": "classification", "classes": ds.task.n_classes}
    else:
        task_obj = {"kind": "regression", "target_dim": ds.task.target_dim}
    manifest = {
        "format": MANIFEST_FORMAT,
        "task": task_obj,
        "channels": ds.n_channels,
        "samples": entries,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")


def channel_bounds(ds):
    """Per-channel (min, max) over every timestep of every sample."""
    stacked = np.vstack(ds.sequences())
    return np.column_stack([stacked.min(axis=0), stacked.max(axis=0)])


def apply_channel_bounds(ds, bounds):
    """Affine map per channel: bounds min -> -1, max -> +1; constant -> 0.

    Values outside the recorded bounds (test data under train bounds) map
    outside [-1, 1]; that is intended.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (ds.n_channels, 2):
        raise ValueError(
            f"bounds must have shape {(ds.n_channels, 2)}, got {bounds.shape}"
        )
    lo, hi = bounds[:, 0], bounds[:, 1]
    span = hi - lo
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    samples = []
    for sample in ds.samples:
        mapped = 2.0 * (sample.series - lo) / safe_span - 1.0
        mapped[:, constant] = 0.0
        samples.append(Sample(series=mapped, target=sample.target))
    return Dataset(
        task=ds.task,
        n_channels=ds.n_channels,
        samples=tuple(samples),
        channel_bounds=bounds,
    )


def normalize_channels(ds):
    """Fit bounds on this dataset (the train split) and apply them."""
    if len(ds) == 0:
        raise DatasetError("cannot normalize an empty dataset")
    return apply_channel_bounds(ds, channel_bounds(ds))


def subset_dataset(ds, indices):
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= len(ds)):
        raise ValueError(f"sample index out of range [0, {len(ds)})")
    return Dataset(
        task=ds.task,
        n_channels=ds.n_channels,
        samples=tuple(ds.samples[i] for i in indices),
        channel_bounds=ds.channel_bounds,
    )


def split_indices(ds, train_fraction, seed):
    """Index sets of a seeded split; classification is stratified per class."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    if ds.task.kind == "classification":
        labels = ds.targets()
        train_idx, test_idx = [], []
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            if members.shape[0] < 2:
                raise DatasetError(
                    f"class {cls} has {members.shape[0]} sample(s); "
                    "need >= 2 to stratify"
                )
            members = members[rng.permutation(members.shape[0])]
            n_train = int(train_fraction * members.shape[0] + 0.5)
            train_idx.extend(members[:n_train])
            test_idx.extend(members[n_train:])
    else:
        order = rng.permutation(len(ds))
        n_train = int(train_fraction * len(ds) + 0.5)
        train_idx, test_idx = order[:n_train], order[n_train:]
    return np.sort(np.asarray(train_idx, dtype=np.int64)), np.sort(
        np.asarray(test_idx, dtype=np.int64)
    )


def split_dataset(ds, train_fraction, seed):
    """Seeded shuffle then split into (train, test) datasets."""
    train_idx, test_idx = split_indices(ds, train_fraction, seed)
    return subset_dataset(ds, train_idx), subset_dataset(ds, test_idx)


def normalize_length(ds, policy, fixed_length=None):
    """Equalize sample lengths: truncate_to_min, pad_zero_to_max, or fixed."""
    lengths = [s.series.shape[0] for s in ds.samples]
    if policy == "truncate_to_min":
        target = min(lengths)
    elif policy == "pad_zero_to_max":
        target = max(lengths)
    elif policy == "fixed":
        if fixed_length is None or fixed_length <= 0:
            raise ValueError(f"fixed policy needs a length > 0, got {fixed_length}")
        target = int(fixed_length)
    else:
        raise ValueError(f"unknown length policy {policy!r}")
    samples = []
    for sample in ds.samples:
        series = sample.series
        if series.shape[0] > target:
            series = series[:target]
        elif series.shape[0] < target:
            pad = np.zeros((target - series.shape[0], ds.n_channels))
            series = np.vstack([series, pad])
        samples.append(Sample(series=series, target=sample.target))
    return replace(ds, samples=tuple(samples))


def gen_delayed_xor(n_samples, T, delay, noise_amplitude, seed):
    """Binary pulses at steps 0 and `delay` in noise; label is their XOR.

    Pulse signs are +-1 added on top of uniform noise of the given
    amplitude; bit 1 means a positive pulse. Classes come out balanced to
    within one sample, alternating through the list.
    """
    if not 1 <= delay < T:
        raise ValueError(f"delay must satisfy 1 <= delay < T, got {delay} vs {T}")
    if noise_amplitude < 0:
        raise ValueError(f"noise_amplitude must be >= 0, got {noise_amplitude}")
    rng = np.random.default_rng(seed)
    series_list, targets = [], []
    for i in range(n_samples):
        label = i % 2
        first = int(rng.integers(0, 2))
        second = first ^ label
        series = rng.uniform(-noise_amplitude, noise_amplitude, size=(T, 1))
        series[0, 0] += 1.0 if first else -1.0
        series[delay, 0] += 1.0 if second else -1.0
        series_list.append(series)
        targets.append(label)
    return make_dataset(
        TaskSpec(kind="classification", n_classes=2), 1, series_list, targets
    )


def narma10_response(u):
    """Drive the NARMA-10 recurrence with input u; returns the y series."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    T = u.shape[0]
    y = np.zeros(T)
    for t in range(9, T - 1):
        y[t + 1] = (
            0.3 * y[t]
            + 0.05 * y[t] * np.sum(y[t - 9 : t + 1])
            + 1.5 * u[t - 9] * u[t]
            + 0.1
        )
    return y


def gen_narma10(n_samples, T, seed):
    """Random-input NARMA-10 sequences; target is the final response value.

    Inputs are uniform on [0, 0.5]. A draw whose response exceeds 1e3 in
    magnitude is discarded and redrawn, up to 10 times per sample.
    """
    if T <= 10:
        raise ValueError(f"T must be > 10, got {T}")
    rng = np.random.default_rng(seed)
    series_list, targets = [], []
    for i in range(n_samples):
        for _ in range(NARMA_MAX_REDRAWS + 1):
            u = rng.uniform(0.0, 0.5, size=T)
            y = narma10_response(u)
            if np.max(np.abs(y)) <= NARMA_DIVERGENCE_LIMIT:
                break
        else:
            raise DatasetError(
                f"sample {i}: NARMA-10 diverged {NARMA_MAX_REDRAWS + 1} times"
            )
        series_list.append(u[:, None])
        targets.append([y[-1]])
    return make_dataset(
        TaskSpec(kind="regression", target_dim=1), 1, series_list, targets
    )

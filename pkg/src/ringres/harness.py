"""Experiment orchestration: spec files, seeded multi-run protocol, reports.

An experiment is fully described by one YAML spec file (see load_spec).
run_experiment builds the dataset once, then for each run derives fresh
seeds, splits, normalizes with train-split bounds, harvests features, fits
the configured readout, and scores the test split (accuracy % for
classification, MSE for regression). Runs may execute on a thread pool;
results are keyed by run index, so the report does not depend on
scheduling order. The best run's full pipeline is kept for persistence.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from threading import Lock

import numpy as np
import yaml

from .data import (
    apply_channel_bounds,
    channel_bounds,
    gen_delayed_xor,
    gen_narma10,
    load_dataset,
    normalize_length,
    split_indices,
    subset_dataset,
)
from .errors import NumericalError, SpecFileError
from .readout import BackpropReadout, RidgeReadout
from .reservoir import ReservoirConfig, _flatten_features, init_reservoir
from .ring import RingConfig, init_ring, recurrent_param_count
from .validation import check_sequences

LENGTH_POLICIES = ("truncate_to_min", "pad_zero_to_max", "fixed")


def _coerce(obj, name, kind, where):
    # YAML 1.1 floats without a sign after "e" (1.0e12) arrive as strings;
    # normalize every numeric field here so nothing unvalidated survives
    # construction and explodes mid-run.
    value = getattr(obj, name)
    if value is None:
        return
    bad = SpecFileError(f"{where}.{name} must be {kind.__name__}, got {value!r}")
    if isinstance(value, bool):
        raise bad
    try:
        out = kind(value)
        if kind is int and float(value) != out:
            raise ValueError
    except (TypeError, ValueError):
        raise bad from None
    object.__setattr__(obj, name, out)


@dataclass(frozen=True)
class ReservoirSpec:
    kind: str = "single"
    size: int = 100
    subs: int = 8
    cross_talk: float = 0.005
    ring_enabled: bool = True
    leak_rate: float = 0.05
    spectral_target: float = 0.1
    input_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("single", "ring"):
            raise SpecFileError(
                f"reservoir.kind must be 'single' or 'ring', got {self.kind!r}"
            )
        _coerce(self, "size", int, "reservoir")
        _coerce(self, "subs", int, "reservoir")
        _coerce(self, "cross_talk", float, "reservoir")
        _coerce(self, "leak_rate", float, "reservoir")
        _coerce(self, "spectral_target", float, "reservoir")
        _coerce(self, "input_scale", float, "reservoir")
        if not isinstance(self.ring_enabled, bool):
            raise SpecFileError(
                f"reservoir.ring_enabled must be true or false, got {self.ring_enabled!r}"
            )
        if self.size < 1 or self.subs < 1:
            raise SpecFileError("reservoir.size and reservoir.subs must be >= 1")
        if self.cross_talk < 0:
            raise SpecFileError("reservoir.cross_talk must be >= 0")


@dataclass(frozen=True)
class FeatureSpec:
    frame_stride: int = 1
    state_stride: int = 1
    mode: str = "trajectory"

    def __post_init__(self):
        if self.mode not in ("trajectory", "final-state"):
            raise SpecFileError(f"features.mode {self.mode!r} is not a feature mode")
        _coerce(self, "frame_stride", int, "features")
        _coerce(self, "state_stride", int, "features")
        if self.frame_stride < 1 or self.state_stride < 1:
            raise SpecFileError("feature strides must be >= 1")


@dataclass(frozen=True)
class ReadoutSpec:
    kind: str = "ridge"
    alpha: float = 0.1
    hidden: tuple = (256, 128)
    learning_rate: float = 0.001
    weight_decay: float = 0.001
    momentum: float = 0.01
    batch_size: int = 64
    epochs: int = 100

    def __post_init__(self):
        if self.kind not in ("ridge", "backprop"):
            raise SpecFileError(
                f"readout.kind must be 'ridge' or 'backprop', got {self.kind!r}"
            )
        _coerce(self, "alpha", float, "readout")
        _coerce(self, "learning_rate", float, "readout")
        _coerce(self, "weight_decay", float, "readout")
        _coerce(self, "momentum", float, "readout")
        _coerce(self, "batch_size", int, "readout")
        _coerce(self, "epochs", int, "readout")
        if not isinstance(self.hidden, (list, tuple)):
            raise SpecFileError(
                f"readout.hidden must be a list of layer widths, got {self.hidden!r}"
            )
        widths = []
        for h in self.hidden:
            if isinstance(h, bool) or not isinstance(h, int) or h < 1:
                raise SpecFileError(
                    f"readout.hidden entries must be ints >= 1, got {h!r}"
                )
            widths.append(int(h))
        object.__setattr__(self, "hidden", tuple(widths))
        if self.alpha <= 0 or self.learning_rate <= 0:
            raise SpecFileError("readout.alpha and readout.learning_rate must be > 0")
        if self.weight_decay < 0:
            raise SpecFileError("readout.weight_decay must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise SpecFileError("readout.momentum must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise SpecFileError("readout.batch_size and readout.epochs must be >= 1")


@dataclass(frozen=True)
class DatasetSpec:
    manifest: str = None
    generator: str = None
    n: int = 100
    length: int = 20
    delay: int = 3
    noise: float = 0.05
    length_policy: str = "pad_zero_to_max"
    fixed_length: int = None

    def __post_init__(self):
        if (self.manifest is None) == (self.generator is None):
            raise SpecFileError(
                "dataset needs exactly one of 'manifest' or 'generator'"
            )
        if self.generator is not None and self.generator not in (
            "delayed_xor",
            "narma10",
        ):
            raise SpecFileError(
                f"dataset.generator {self.generator!r} is not one of "
                "'delayed_xor', 'narma10'"
            )
        if self.length_policy not in LENGTH_POLICIES:
            raise SpecFileError(
                f"dataset.length_policy {self.length_policy!r} is not one of "
                f"{LENGTH_POLICIES}"
            )
        _coerce(self, "n", int, "dataset")
        _coerce(self, "length", int, "dataset")
        _coerce(self, "delay", int, "dataset")
        _coerce(self, "noise", float, "dataset")
        _coerce(self, "fixed_length", int, "dataset")
        if self.n < 1 or self.length < 1:
            raise SpecFileError("dataset.n and dataset.length must be >= 1")
        if self.fixed_length is not None and self.fixed_length < 1:
            raise SpecFileError("dataset.fixed_length must be >= 1")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "experiment"
    seed: int = 0
    runs: int = 1
    split: float = 0.8
    reservoir: ReservoirSpec = field(default_factory=ReservoirSpec)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    readout: ReadoutSpec = field(default_factory=ReadoutSpec)
    dataset: DatasetSpec = field(
        default_factory=lambda: DatasetSpec(generator="delayed_xor")
    )

    def __post_init__(self):
        _coerce(self, "seed", int, "spec")
        _coerce(self, "runs", int, "spec")
        _coerce(self, "split", float, "spec")
        if self.seed < 0:
            raise SpecFileError(f"seed must be >= 0, got {self.seed}")
        if self.runs < 1:
            raise SpecFileError(f"runs must be >= 1, got {self.runs}")
        if not 0.0 < self.split < 1.0:
            raise SpecFileError(f"split must be in (0, 1), got {self.split}")

    def to_dict(self):
        d = asdict(self)
        d["readout"]["hidden"] = list(self.readout.hidden)
        return d


def _section(obj, where):
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise SpecFileError(f"{where} must be a mapping, got {type(obj).__name__}")
    return obj


def _build(cls, obj, where, renames=None):
    obj = dict(_section(obj, where))
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    for key in (renames or {}):
        if key in obj:
            obj[renames[key]] = obj.pop(key)
    unknown = sorted(set(obj) - fields)
    if unknown:
        raise SpecFileError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise SpecFileError(f"{where}: {exc}") from exc


_TOP_KEYS = {"name", "seed", "runs", "split", "reservoir", "features", "readout", "dataset"}


def spec_from_dict(raw, where="spec"):
    raw = _section(raw, where)
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise SpecFileError(f"{where}: unknown key(s) {', '.join(unknown)}")
    reservoir = _build(ReservoirSpec, raw.get("reservoir"), f"{where}.reservoir")
    features = _build(FeatureSpec, raw.get("features"), f"{where}.features")
    readout = _build(ReadoutSpec, raw.get("readout"), f"{where}.readout")
    if raw.get("dataset") is None:
        dataset = DatasetSpec(generator="delayed_xor")
    else:
        dataset = _build(DatasetSpec, raw.get("dataset"), f"{where}.dataset")
    try:
        return ExperimentSpec(
            name=str(raw.get("name", "experiment")),
            seed=int(raw.get("seed", 0)),
            runs=int(raw.get("runs", 1)),
            split=float(raw.get("split", 0.8)),
            reservoir=reservoir,
            features=features,
            readout=readout,
            dataset=dataset,
        )
    except (TypeError, ValueError) as exc:
        raise SpecFileError(f"{where}: {exc}") from exc


def load_spec(path):
    """Parse a YAML experiment spec; unknown keys anywhere are an error."""
    path = Path(path)
    if not path.is_file():
        raise SpecFileError(f"spec file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise SpecFileError(f"{path}: invalid YAML: {exc}") from exc
    return spec_from_dict(raw, where=str(path))


def dump_spec(spec):
    """Canonical YAML text of a spec with every default filled in."""
    return yaml.safe_dump(spec.to_dict(), sort_keys=False)


def build_dataset(dspec, seed):
    """Materialize the dataset a spec names, length-normalized."""
    if dspec.manifest is not None:
        ds = load_dataset(dspec.manifest)
    elif dspec.generator == "delayed_xor":
        ds = gen_delayed_xor(dspec.n, dspec.length, dspec.delay, dspec.noise, seed)
    else:
        ds = gen_narma10(dspec.n, dspec.length, seed)
    return normalize_length(ds, dspec.length_policy, dspec.fixed_length)


def build_ensemble(rspec, n_channels, seed):
    if rspec.kind == "single":
        return init_reservoir(
            ReservoirConfig(
                size=rspec.size,
                input_dim=n_channels,
                leak_rate=rspec.leak_rate,
                spectral_target=rspec.spectral_target,
                input_scale=rspec.input_scale,
                seed=seed,
            )
        )
    return init_ring(
        RingConfig(
            n_subs=rspec.subs,
            sub_size=rspec.size,
            input_dim=n_channels,
            leak_rate=rspec.leak_rate,
            spectral_target=rspec.spectral_target,
            input_scale=rspec.input_scale,
            cross_talk=rspec.cross_talk,
            ring_enabled=rspec.ring_enabled,
            seed=seed,
        )
    )


def harvest_features(ensemble, sequences, features_spec):
    rows = [
        _flatten_features(
            ensemble.harvest(
                seq, features_spec.frame_stride, features_spec.state_stride
            ),
            features_spec.mode,
        )
        for seq in sequences
    ]
    return np.stack(rows)


def build_readout(rospec, task_kind, seed):
    if rospec.kind == "ridge":
        return RidgeReadout(alpha=rospec.alpha, task=task_kind)
    return BackpropReadout(
        hidden_sizes=tuple(rospec.hidden),
        learning_rate=rospec.learning_rate,
        weight_decay=rospec.weight_decay,
        momentum=rospec.momentum,
        batch_size=rospec.batch_size,
        epochs=rospec.epochs,
        task=task_kind,
        seed=seed,
    )


def accuracy_pct(y_true, y_pred):
    return 100.0 * float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def mean_squared_error(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(y_true.shape)
    return float(np.mean((y_true - y_pred) ** 2))


def _score(task_kind, y_true, y_pred):
    if task_kind == "classification":
        return accuracy_pct(y_true, y_pred)
    return mean_squared_error(y_true, y_pred)


@dataclass
class TrainedPipeline:
    """Everything needed to replay a trained run on new or original data."""

    featurizer_kind: str
    ensemble: object
    frame_stride: int
    state_stride: int
    feature_mode: str
    channel_bounds: np.ndarray
    readout_kind: str
    readout: object
    task: object
    metric_name: str
    train_metric: float
    test_metric: float
    train_indices: np.ndarray
    test_indices: np.ndarray
    experiment: dict

    def featurize(self, sequences):
        """Features for already-normalized sequences."""
        seqs, _ = check_sequences(
            sequences, n_channels=self.channel_bounds.shape[0]
        )
        spec = FeatureSpec(self.frame_stride, self.state_stride, self.feature_mode)
        return harvest_features(self.ensemble, seqs, spec)

    def predict(self, sequences):
        """Predict on raw sequences; stored channel bounds are applied."""
        seqs, n_channels = check_sequences(sequences)
        if n_channels != self.channel_bounds.shape[0]:
            raise ValueError(
                f"sequences have {n_channels} channels, model expects "
                f"{self.channel_bounds.shape[0]}"
            )
        lo = self.channel_bounds[:, 0]
        span = self.channel_bounds[:, 1] - lo
        constant = span == 0
        safe = np.where(constant, 1.0, span)
        normalized = []
        for seq in seqs:
            mapped = 2.0 * (seq - lo) / safe - 1.0
            mapped[:, constant] = 0.0
            normalized.append(mapped)
        return self.readout.predict(self.featurize(normalized))

    def evaluate(self, ds, split="all"):
        """Score a dataset; split replays the recorded train/test rows."""
        if ds.n_channels != self.channel_bounds.shape[0]:
            raise ValueError(
                f"dataset has {ds.n_channels} channels, model expects "
                f"{self.channel_bounds.shape[0]}"
            )
        if ds.task.kind != self.task.kind:
            raise ValueError(
                f"dataset task {ds.task.kind!r} does not match model task "
                f"{self.task.kind!r}"
            )
        if split == "train":
            ds = subset_dataset(ds, self.train_indices)
        elif split == "test":
            ds = subset_dataset(ds, self.test_indices)
        elif split != "all":
            raise ValueError(f"split must be all, train, or test, got {split!r}")
        dspec = self.experiment.get("dataset", {})
        ds = normalize_length(
            ds,
            dspec.get("length_policy", "pad_zero_to_max"),
            dspec.get("fixed_length"),
        )
        normalized = apply_channel_bounds(ds, self.channel_bounds)
        preds = self.readout.predict(self.featurize(normalized.sequences()))
        return _score(self.task.kind, ds.targets(), preds)

    def parameter_count(self):
        if self.readout_kind == "ridge":
            return int(self.readout.coef_.size)
        return int(sum(p.size for _, p in self.readout.net_.parameters()))


@dataclass
class RunReport:
    name: str
    task_kind: str
    metric_name: str
    metrics: list
    seconds: list
    mean: float
    sd: float
    single_run: bool
    recurrent_params: int
    readout_params: int
    best_run_index: int
    best_pipeline: TrainedPipeline = field(repr=False, default=None)

    @property
    def n_runs(self):
        return len(self.metrics)


def derive_run_seeds(master_seed, run_index):
    """(reservoir, split, training) seeds for one run; injective in the index."""
    state = np.random.SeedSequence([master_seed, run_index]).generate_state(3)
    return tuple(int(v) for v in state)


def _check_finite(arr, what, run_index):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"run {run_index}: non-finite values in {what}")


def run_single(spec, ds, run_index):
    """One seeded run; returns (test metric, seconds, fitted pipeline)."""
    res_seed, split_seed, train_seed = derive_run_seeds(spec.seed, run_index)
    start = time.perf_counter()
    train_idx, test_idx = split_indices(ds, spec.split, split_seed)
    train_ds = subset_dataset(ds, train_idx)
    test_ds = subset_dataset(ds, test_idx)
    bounds = channel_bounds(train_ds)
    train_norm = apply_channel_bounds(train_ds, bounds)
    test_norm = apply_channel_bounds(test_ds, bounds)
    ensemble = build_ensemble(spec.reservoir, ds.n_channels, res_seed)
    feats_train = harvest_features(ensemble, train_norm.sequences(), spec.features)
    feats_test = harvest_features(ensemble, test_norm.sequences(), spec.features)
    _check_finite(feats_train, "train features", run_index)
    _check_finite(feats_test, "test features", run_index)
    readout = build_readout(spec.readout, ds.task.kind, train_seed)
    readout.fit(feats_train, train_ds.targets())
    if spec.readout.kind == "backprop":
        _check_finite(np.asarray(readout.loss_history_), "training loss", run_index)
    train_pred = readout.predict(feats_train)
    test_pred = readout.predict(feats_test)
    if ds.task.kind == "regression":
        _check_finite(train_pred, "train predictions", run_index)
        _check_finite(test_pred, "test predictions", run_index)
    train_metric = _score(ds.task.kind, train_ds.targets(), train_pred)
    test_metric = _score(ds.task.kind, test_ds.targets(), test_pred)
    seconds = time.perf_counter() - start
    metric_name = "accuracy_pct" if ds.task.kind == "classification" else "mse"
    pipeline = TrainedPipeline(
        featurizer_kind=spec.reservoir.kind,
        ensemble=ensemble,
        frame_stride=spec.features.frame_stride,
        state_stride=spec.features.state_stride,
        feature_mode=spec.features.mode,
        channel_bounds=bounds,
        readout_kind=spec.readout.kind,
        readout=readout,
        task=ds.task,
        metric_name=metric_name,
        train_metric=train_metric,
        test_metric=test_metric,
        train_indices=train_idx,
        test_indices=test_idx,
        experiment=spec.to_dict(),
    )
    return test_metric, seconds, pipeline


def _better_key(task_kind, metric, run_index):
    # minimize: regression wants low MSE, classification high accuracy;
    # ties go to the lowest run index
    value = metric if task_kind == "regression" else -metric
    return (value, run_index)


def run_experiment(spec, max_workers=None):
    """Execute every run of a spec and aggregate the report."""
    ds = build_dataset(spec.dataset, spec.seed)
    if max_workers is None:
        max_workers = os.cpu_count() or 1
    max_workers = max(1, min(int(max_workers), spec.runs))
    metrics = [None] * spec.runs
    seconds = [None] * spec.runs
    best = None  # (key, pipeline)
    lock = Lock()

    def worker(i):
        try:
            return i, run_single(spec, ds, i)
        except (NumericalError, SpecFileError):
            raise
        except ValueError as exc:
            raise ValueError(f"run {i}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for i, (metric, secs, pipeline) in pool.map(worker, range(spec.runs)):
            metrics[i] = metric
            seconds[i] = secs
            key = _better_key(ds.task.kind, metric, i)
            with lock:
                if best is None or key < best[0]:
                    best = (key, pipeline)
    best_pipeline = best[1]
    values = np.asarray(metrics, dtype=np.float64)
    sd = 0.0 if spec.runs == 1 else float(np.std(values, ddof=1))
    if spec.reservoir.kind == "single":
        recurrent = spec.reservoir.size**2
    else:
        recurrent = recurrent_param_count(spec.reservoir.subs, spec.reservoir.size)
    return RunReport(
        name=spec.name,
        task_kind=ds.task.kind,
        metric_name=best_pipeline.metric_name,
        metrics=[float(v) for v in values],
        seconds=[float(s) for s in seconds],
        mean=float(values.mean()),
        sd=sd,
        single_run=spec.runs == 1,
        recurrent_params=int(recurrent),
        readout_params=best_pipeline.parameter_count(),
        best_run_index=int(best[0][1]),
        best_pipeline=best_pipeline,
    )


def memreport(spec):
    """Recurrent-parameter footprint of the spec's reservoir, as text."""
    r = spec.reservoir
    lines = [f"memory report: {spec.name}"]
    if r.kind == "single":
        count = r.size**2
        lines += [
            f"reservoir kind: single (N={r.size})",
            f"recurrent parameters: {count:,} ({r.size}^2)",
            f"input parameters per input channel: {r.size:,}",
        ]
    else:
        count = recurrent_param_count(r.subs, r.size)
        equiv_n = r.subs * r.size
        equiv = equiv_n**2
        ratio = equiv / count
        lines += [
            f"reservoir kind: ring (subs={r.subs}, sub_size={r.size})",
            f"recurrent parameters: {count:,} "
            f"({r.subs}*{r.size}^2 + {r.size}^2)",
            f"equivalent single reservoir: N={equiv_n}, "
            f"{equiv:,} parameters ({equiv_n}^2)",
            f"ratio single/ring: {ratio:.2f}",
            f"breakdown: {r.subs} recurrent blocks of {r.size}^2 = "
            f"{r.subs * r.size**2:,}, plus one shared {r.size}^2 = "
            f"{r.size**2:,}; total {count:,}",
        ]
    return "\n".join(lines) + "\n"


def emit_results(report, path, fmt):
    """Write a report file: csv (per-run, with timing) or table-text."""
    if report.n_runs == 0:
        raise ValueError("cannot emit an empty report")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = ["run_index,metric,seconds"]
        for i, (m, s) in enumerate(zip(report.metrics, report.seconds)):
            lines.append(f"{i},{m!r},{s!r}")
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "table-text":
        # no wall-clock here: this form must be byte-identical across
        # reruns of the same seed (timing lives in the csv form)
        lines = [
            f"experiment: {report.name}",
            f"task: {report.task_kind}",
            f"metric: {report.metric_name}",
            f"runs: {report.n_runs}",
            f"single run: {'yes' if report.single_run else 'no'}",
        ]
        for i, m in enumerate(report.metrics):
            lines.append(f"run {i}: {m!r}")
        lines += [
            f"mean ± sd: {report.mean!r} ± {report.sd!r}",
            f"best run: {report.best_run_index}",
            f"recurrent parameters: {report.recurrent_params}",
            f"readout parameters: {report.readout_params}",
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"format must be 'csv' or 'table-text', got {fmt!r}")
    return path

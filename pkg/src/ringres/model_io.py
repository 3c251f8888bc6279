"""Versioned model files: save/load for reservoirs, rings, readouts, pipelines.

Container is a .npz archive holding every weight array as float64 plus one
"meta" entry, a JSON string tagged {"format": "ringres-model", "version": 1,
"kind": ...}. Arrays are stored raw, so a save/load round-trip is bit-exact.
Anything that is not such an archive raises ModelFormatError.
"""

import json
import zipfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import TaskSpec
from .errors import ModelFormatError
from .harness import TrainedPipeline
from .readout import BackpropReadout, ReadoutNet, RidgeReadout
from .reservoir import Reservoir, ReservoirConfig
from .ring import RingConfig, RingEnsemble

MODEL_FORMAT = "ringres-model"
MODEL_VERSION = 1


def _pack_reservoir(res):
    return {"config": asdict(res.config)}, {"W_in": res.W_in, "W_rec": res.W_rec}


def _unpack_reservoir(meta, arrays, prefix=""):
    config = ReservoirConfig(**meta["config"])
    return Reservoir(
        config=config,
        W_in=arrays[prefix + "W_in"],
        W_rec=arrays[prefix + "W_rec"],
    )


def _pack_ring(ens):
    arrays = {"W_shared": ens.W_shared}
    for r, sub in enumerate(ens.subs):
        arrays[f"sub{r}.W_in"] = sub.W_in
        arrays[f"sub{r}.W_rec"] = sub.W_rec
    return {"config": asdict(ens.config)}, arrays


def _unpack_ring(meta, arrays, prefix=""):
    config = RingConfig(**meta["config"])
    subs = tuple(
        Reservoir(
            config=config.sub_config(r),
            W_in=arrays[f"{prefix}sub{r}.W_in"],
            W_rec=arrays[f"{prefix}sub{r}.W_rec"],
        )
        for r in range(config.n_subs)
    )
    return RingEnsemble(config=config, subs=subs, W_shared=arrays[prefix + "W_shared"])


def _pack_net(net):
    meta = {
        "input_dim": net.input_dim,
        "hidden_sizes": list(net.hidden_sizes),
        "output_dim": net.output_dim,
        "seed": net.seed,
        "mode": net.mode,
    }
    arrays = {}
    for i, (aff, bn) in enumerate(net.hidden):
        arrays[f"hidden{i}.W"] = aff.W
        arrays[f"hidden{i}.b"] = aff.b
        arrays[f"hidden{i}.gamma"] = bn.gamma
        arrays[f"hidden{i}.shift"] = bn.shift
        arrays[f"hidden{i}.running_mean"] = bn.running_mean
        arrays[f"hidden{i}.running_var"] = bn.running_var
    arrays["out.W"] = net.out.W
    arrays["out.b"] = net.out.b
    return meta, arrays


def _unpack_net(meta, arrays, prefix=""):
    net = ReadoutNet(
        meta["input_dim"],
        tuple(meta["hidden_sizes"]),
        meta["output_dim"],
        seed=meta["seed"],
    )
    for i, (aff, bn) in enumerate(net.hidden):
        aff.W = arrays[f"{prefix}hidden{i}.W"]
        aff.b = arrays[f"{prefix}hidden{i}.b"]
        bn.gamma = arrays[f"{prefix}hidden{i}.gamma"]
        bn.shift = arrays[f"{prefix}hidden{i}.shift"]
        bn.running_mean = arrays[f"{prefix}hidden{i}.running_mean"]
        bn.running_var = arrays[f"{prefix}hidden{i}.running_var"]
    net.out.W = arrays[prefix + "out.W"]
    net.out.b = arrays[prefix + "out.b"]
    net.mode = meta["mode"]
    return net


def _pack_ridge(est):
    meta = {"alpha": est.alpha, "task": est.task}
    arrays = {"coef": est.coef_}
    if est.task == "classification":
        arrays["classes"] = np.asarray(est.classes_)
    else:
        meta["y_was_1d"] = bool(est._y_was_1d)
    return meta, arrays


def _unpack_ridge(meta, arrays, prefix=""):
    est = RidgeReadout(alpha=meta["alpha"], task=meta["task"])
    est.coef_ = arrays[prefix + "coef"]
    est.n_features_in_ = est.coef_.shape[0]
    if est.task == "classification":
        est.classes_ = arrays[prefix + "classes"]
    else:
        est._y_was_1d = meta["y_was_1d"]
    return est


def _pack_backprop(est):
    net_meta, arrays = _pack_net(est.net_)
    meta = {
        "params": {
            "hidden_sizes": list(est.hidden_sizes),
            "learning_rate": est.learning_rate,
            "weight_decay": est.weight_decay,
            "momentum": est.momentum,
            "batch_size": est.batch_size,
            "epochs": est.epochs,
            "task": est.task,
            "seed": est.seed,
        },
        "net": net_meta,
        "n_features_in": est.n_features_in_,
    }
    arrays["loss_history"] = np.asarray(est.loss_history_, dtype=np.float64)
    if est.task == "classification":
        arrays["classes"] = np.asarray(est.classes_)
    else:
        meta["y_was_1d"] = bool(est._y_was_1d)
    return meta, arrays


def _unpack_backprop(meta, arrays, prefix=""):
    params = dict(meta["params"])
    params["hidden_sizes"] = tuple(params["hidden_sizes"])
    est = BackpropReadout(**params)
    est.net_ = _unpack_net(meta["net"], arrays, prefix)
    est.loss_history_ = [float(v) for v in arrays[prefix + "loss_history"]]
    est.n_features_in_ = meta["n_features_in"]
    if est.task == "classification":
        est.classes_ = arrays[prefix + "classes"]
    else:
        est._y_was_1d = meta["y_was_1d"]
    return est


_FEATURIZER_PACKERS = {
    "single": (_pack_reservoir, _unpack_reservoir),
    "ring": (_pack_ring, _unpack_ring),
}
_READOUT_PACKERS = {
    "ridge": (_pack_ridge, _unpack_ridge),
    "backprop": (_pack_backprop, _unpack_backprop),
}


def _pack_pipeline(pipe):
    fz_pack, _ = _FEATURIZER_PACKERS[pipe.featurizer_kind]
    fz_meta, fz_arrays = fz_pack(pipe.ensemble)
    ro_pack, _ = _READOUT_PACKERS[pipe.readout_kind]
    ro_meta, ro_arrays = ro_pack(pipe.readout)
    task = pipe.task
    task_obj = (
        {"kind": "classification", "classes": task.n_classes}
        if task.kind == "classification"
        else {"kind": "regression", "target_dim": task.target_dim}
    )
    meta = {
        "featurizer": {"kind": pipe.featurizer_kind, **fz_meta},
        "readout_kind": pipe.readout_kind,
        "readout": ro_meta,
        "frame_stride": pipe.frame_stride,
        "state_stride": pipe.state_stride,
        "feature_mode": pipe.feature_mode,
        "task": task_obj,
        "metric_name": pipe.metric_name,
        "train_metric": pipe.train_metric,
        "test_metric": pipe.test_metric,
        "experiment": pipe.experiment,
    }
    arrays = {
        "channel_bounds": pipe.channel_bounds,
        "train_indices": np.asarray(pipe.train_indices, dtype=np.int64),
        "test_indices": np.asarray(pipe.test_indices, dtype=np.int64),
    }
    for k, v in fz_arrays.items():
        arrays["featurizer." + k] = v
    for k, v in ro_arrays.items():
        arrays["readout." + k] = v
    return meta, arrays


def _unpack_pipeline(meta, arrays):
    fz_kind = meta["featurizer"]["kind"]
    _, fz_unpack = _FEATURIZER_PACKERS[fz_kind]
    ensemble = fz_unpack(meta["featurizer"], arrays, prefix="featurizer.")
    ro_kind = meta["readout_kind"]
    _, ro_unpack = _READOUT_PACKERS[ro_kind]
    readout = ro_unpack(meta["readout"], arrays, prefix="readout.")
    task_obj = meta["task"]
    if task_obj["kind"] == "classification":
        task = TaskSpec(kind="classification", n_classes=task_obj["classes"])
    else:
        task = TaskSpec(kind="regression", target_dim=task_obj["target_dim"])
    return TrainedPipeline(
        featurizer_kind=fz_kind,
        ensemble=ensemble,
        frame_stride=meta["frame_stride"],
        state_stride=meta["state_stride"],
        feature_mode=meta["feature_mode"],
        channel_bounds=arrays["channel_bounds"],
        readout_kind=ro_kind,
        readout=readout,
        task=task,
        metric_name=meta["metric_name"],
        train_metric=meta["train_metric"],
        test_metric=meta["test_metric"],
        train_indices=arrays["train_indices"],
        test_indices=arrays["test_indices"],
        experiment=meta["experiment"],
    )


def save_model(obj, path):
    """Write any supported model object; the file names its own kind."""
    if isinstance(obj, Reservoir):
        kind, (meta, arrays) = "reservoir", _pack_reservoir(obj)
    elif isinstance(obj, RingEnsemble):
        kind, (meta, arrays) = "ring", _pack_ring(obj)
    elif isinstance(obj, ReadoutNet):
        kind, (meta, arrays) = "readout-net", _pack_net(obj)
    elif isinstance(obj, RidgeReadout):
        kind, (meta, arrays) = "ridge", _pack_ridge(obj)
    elif isinstance(obj, BackpropReadout):
        kind, (meta, arrays) = "backprop", _pack_backprop(obj)
    elif isinstance(obj, TrainedPipeline):
        kind, (meta, arrays) = "pipeline", _pack_pipeline(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    meta = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": kind, **meta}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.str_(json.dumps(meta)), **arrays)


_UNPACKERS = {
    "reservoir": _unpack_reservoir,
    "ring": _unpack_ring,
    "readout-net": _unpack_net,
    "ridge": _unpack_ridge,
    "backprop": _unpack_backprop,
    "pipeline": _unpack_pipeline,
}


def read_meta(path):
    """Validate the container and return its parsed meta block."""
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"model file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            if "meta" not in archive:
                raise ModelFormatError(f"{path}: no meta entry; not a model file")
            raw = str(archive["meta"])
    except (zipfile.BadZipFile, OSError, ValueError) as exc:
        raise ModelFormatError(f"{path}: unreadable model container: {exc}") from exc
    try:
        meta = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt meta block: {exc}") from exc
    if meta.get("format") != MODEL_FORMAT:
        raise ModelFormatError(
            f"{path}: format tag {meta.get('format')!r}, expected {MODEL_FORMAT!r}"
        )
    if meta.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: format version {meta.get('version')!r}, "
            f"expected {MODEL_VERSION}"
        )
    if meta.get("kind") not in _UNPACKERS:
        raise ModelFormatError(f"{path}: unknown model kind {meta.get('kind')!r}")
    return meta


def load_model(path):
    """Inverse of save_model; bit-exact for every array."""
    meta = read_meta(path)
    with np.load(path, allow_pickle=False) as archive:
        arrays = {k: archive[k] for k in archive.files if k != "meta"}
    return _UNPACKERS[meta["kind"]](meta, arrays)

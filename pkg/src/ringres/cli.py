"""Train, evaluate, and manage reservoir experiments from the shell.

Subcommands:
  train      run an experiment spec, optionally saving model and report
  eval       score a saved pipeline on a dataset split
  gen        generate a synthetic dataset to a manifest directory
  memreport  recurrent-parameter footprint of a spec's reservoir
  inspect    describe a saved model file

Exit codes: 0 success, 1 bad input (files, spec values, usage), 2 a
computation left the finite domain. The spec argument of train and
memreport accepts either a path or the bare name of a bundled preset.
Worker threads are capped by the RINGRES_THREADS environment variable.
"""

import argparse
import importlib.resources
import os
import sys
from dataclasses import replace
from pathlib import Path

from .data import gen_delayed_xor, gen_narma10, load_dataset, save_dataset
from .errors import InputError, NumericalError
from .harness import (
    DatasetSpec,
    TrainedPipeline,
    build_dataset,
    dump_spec,
    emit_results,
    load_spec,
    memreport,
    run_experiment,
)
from .linalg import spectral_radius
from .model_io import load_model, read_meta, save_model
from .readout import ReadoutNet
from .reservoir import Reservoir
from .ring import RingEnsemble

GENERATOR_ALIASES = {
    "xor": "delayed_xor",
    "delayed_xor": "delayed_xor",
    "narma10": "narma10",
}


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _preset_names():
    root = importlib.resources.files("ringres") / "presets"
    return sorted(p.name[: -len(".spec")] for p in root.iterdir() if p.name.endswith(".spec"))


def resolve_spec(name):
    """A spec argument is a file path or the bare name of a preset."""
    p = Path(name)
    if p.is_file():
        return p
    if os.sep not in str(name) and p.suffix == "":
        candidate = importlib.resources.files("ringres") / "presets" / f"{name}.spec"
        if candidate.is_file():
            return Path(str(candidate))
    raise InputError(
        f"spec file not found: {name} (bundled presets: {', '.join(_preset_names())})"
    )


def thread_cap():
    raw = os.environ.get("RINGRES_THREADS")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"RINGRES_THREADS must be a positive integer, got {raw!r}")
    if value < 1:
        raise InputError(f"RINGRES_THREADS must be >= 1, got {value}")
    return value


def cmd_train(args):
    spec = load_spec(resolve_spec(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.runs is not None:
        spec = replace(spec, runs=args.runs)
    if args.features is not None:
        spec = replace(spec, features=replace(spec.features, mode=args.features))
    print("# resolved spec")
    print(dump_spec(spec), end="")
    report = run_experiment(spec, max_workers=thread_cap())
    print(f"# results ({report.metric_name})")
    for i, (metric, secs) in enumerate(zip(report.metrics, report.seconds)):
        print(f"run {i}: {metric!r} ({secs:.2f}s)")
    print(f"mean ± sd: {report.mean!r} ± {report.sd!r}")
    print(f"best run: {report.best_run_index}")
    pipe = report.best_pipeline
    if spec.readout.kind == "backprop":
        for epoch, loss in enumerate(pipe.readout.loss_history_):
            print(f"trainlog {epoch} {loss!r}")
    if args.out_report is not None:
        path = emit_results(report, args.out_report, args.format)
        print(f"report written: {path}")
    if args.out_model is not None:
        save_model(pipe, args.out_model)
        print(f"model written: {args.out_model}")
    return 0


def cmd_eval(args):
    pipe = load_model(args.model)
    if not isinstance(pipe, TrainedPipeline):
        raise InputError(
            f"{args.model}: not a trained pipeline; save one with train --out-model"
        )
    if args.manifest is not None:
        ds = load_dataset(args.manifest)
    else:
        stored = pipe.experiment.get("dataset") or {}
        dspec = DatasetSpec(**stored)
        ds = build_dataset(dspec, pipe.experiment.get("seed", 0))
    value = pipe.evaluate(ds, args.split)
    print(f"{pipe.metric_name} ({args.split}): {value!r}")
    print(f"recorded train: {pipe.train_metric!r}")
    print(f"recorded test: {pipe.test_metric!r}")
    return 0


def cmd_gen(args):
    kind = GENERATOR_ALIASES.get(args.generator)
    if kind is None:
        raise InputError(
            f"unknown generator {args.generator!r}; use xor, delayed_xor, or narma10"
        )
    if kind == "delayed_xor":
        ds = gen_delayed_xor(args.n, args.length, args.delay, args.noise, args.seed)
    else:
        ds = gen_narma10(args.n, args.length, args.seed)
    manifest = Path(args.out) / "manifest.json"
    save_dataset(ds, manifest)
    print(f"wrote {len(ds.samples)} samples ({ds.task.kind}) to {manifest}")
    return 0


def cmd_memreport(args):
    spec = load_spec(resolve_spec(args.spec))
    print(memreport(spec), end="")
    return 0


def _describe_reservoir(res, indent=""):
    cfg = res.config
    print(f"{indent}units: {cfg.size}")
    print(f"{indent}input channels: {cfg.input_dim}")
    print(f"{indent}leak rate: {cfg.leak_rate}")
    print(f"{indent}spectral target: {cfg.spectral_target}")
    print(f"{indent}input scale: {cfg.input_scale}")
    print(f"{indent}measured spectral radius: {spectral_radius(res.W_rec):.6f}")


def _describe_ring(ens, indent=""):
    cfg = ens.config
    print(f"{indent}sub-reservoirs: {cfg.n_subs}")
    print(f"{indent}units per sub: {cfg.sub_size}")
    print(f"{indent}input channels: {cfg.input_dim}")
    print(f"{indent}leak rate: {cfg.leak_rate}")
    print(f"{indent}spectral target: {cfg.spectral_target}")
    print(f"{indent}cross-talk: {cfg.cross_talk}")
    print(f"{indent}ring enabled: {cfg.ring_enabled}")
    for r, sub in enumerate(ens.subs):
        print(f"{indent}sub {r} spectral radius: {spectral_radius(sub.W_rec):.6f}")
    print(f"{indent}shared coupling radius: {spectral_radius(ens.W_shared):.6f}")


def _describe_net(net, indent=""):
    sizes = [net.input_dim, *net.hidden_sizes, net.output_dim]
    print(f"{indent}layers: {' -> '.join(str(s) for s in sizes)}")
    print(f"{indent}mode: {net.mode}")


def cmd_inspect(args):
    meta = read_meta(args.model)
    obj = load_model(args.model)
    print(f"kind: {meta['kind']}")
    print(f"format: {meta['format']} version {meta['version']}")
    if isinstance(obj, Reservoir):
        _describe_reservoir(obj)
    elif isinstance(obj, RingEnsemble):
        _describe_ring(obj)
    elif isinstance(obj, ReadoutNet):
        _describe_net(obj)
    elif isinstance(obj, TrainedPipeline):
        print(f"task: {obj.task.kind}")
        print(f"metric: {obj.metric_name}")
        print(f"train metric: {obj.train_metric!r}")
        print(f"test metric: {obj.test_metric!r}")
        print(f"feature mode: {obj.feature_mode}")
        print(f"frame stride: {obj.frame_stride}")
        print(f"state stride: {obj.state_stride}")
        print(f"train/test rows: {obj.train_indices.size}/{obj.test_indices.size}")
        print(f"featurizer: {obj.featurizer_kind}")
        if isinstance(obj.ensemble, RingEnsemble):
            _describe_ring(obj.ensemble, indent="  ")
        else:
            _describe_reservoir(obj.ensemble, indent="  ")
        print(f"readout: {obj.readout_kind}")
        if obj.readout_kind == "backprop":
            _describe_net(obj.readout.net_, indent="  ")
            hist = obj.readout.loss_history_
            print(f"  epochs trained: {len(hist)}")
            print(f"  final loss: {hist[-1]!r}")
        else:
            print(f"  alpha: {obj.readout.alpha}")
            print(f"  coefficients: {obj.readout.coef_.shape}")
    else:  # ridge or backprop readout saved on its own
        for line in _describe_readout_lines(obj):
            print(line)
    return 0


def _describe_readout_lines(est):
    if hasattr(est, "net_"):
        sizes = [est.net_.input_dim, *est.net_.hidden_sizes, est.net_.output_dim]
        return [
            f"task: {est.task}",
            f"layers: {' -> '.join(str(s) for s in sizes)}",
            f"epochs trained: {len(est.loss_history_)}",
            f"final loss: {est.loss_history_[-1]!r}",
        ]
    return [
        f"task: {est.task}",
        f"alpha: {est.alpha}",
        f"coefficients: {est.coef_.shape}",
    ]


def build_parser():
    parser = _Parser(prog="ringres", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run an experiment spec")
    p_train.add_argument("--spec", required=True, help="spec path or preset name")
    p_train.add_argument("--seed", type=int, default=None, help="override spec seed")
    p_train.add_argument("--runs", type=int, default=None, help="override run count")
    p_train.add_argument(
        "--features", choices=("trajectory", "final-state"), default=None,
        help="override feature mode",
    )
    p_train.add_argument("--out-model", default=None, help="save best pipeline here")
    p_train.add_argument("--out-report", default=None, help="write per-run report here")
    p_train.add_argument(
        "--format", choices=("csv", "table-text"), default="table-text",
        help="report file format",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a saved pipeline")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument(
        "--manifest", default=None,
        help="score this dataset instead of the training one",
    )
    p_eval.add_argument("--split", choices=("all", "train", "test"), default="test")
    p_eval.set_defaults(func=cmd_eval)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--generator", required=True, help="xor, delayed_xor, or narma10")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--length", type=int, default=20)
    p_gen.add_argument("--delay", type=int, default=3)
    p_gen.add_argument("--noise", type=float, default=0.05)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=cmd_gen)

    p_mem = sub.add_parser("memreport", help="reservoir parameter footprint")
    p_mem.add_argument("--spec", required=True, help="spec path or preset name")
    p_mem.set_defaults(func=cmd_memreport)

    p_inspect = sub.add_parser("inspect", help="describe a saved model file")
    p_inspect.add_argument("--model", required=True)
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

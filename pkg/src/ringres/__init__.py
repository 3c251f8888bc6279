"""ringres: parallel echo-state reservoirs with ridge or backprop readouts.

The package builds leaky tanh reservoirs, optionally arranged as a ring of
sub-reservoirs coupled through one shared cross-talk matrix, harvests their
state trajectories as fixed-length features, and fits either a closed-form
ridge readout or a small batch-normalized feedforward net on top. A CLI
(`ringres` or `python -m ringres`) drives dataset generation, training,
evaluation, and memory-footprint reports from YAML experiment specs.
"""

from .errors import (
    DatasetError,
    InputError,
    ModelFormatError,
    NumericalError,
    RingresError,
    SpecFileError,
)
from .linalg import solve_ridge, spectral_radius
from .reservoir import Reservoir, ReservoirConfig, ReservoirFeaturizer, init_reservoir
from .ring import RingConfig, RingEnsemble, RingFeaturizer, init_ring
from .readout import (
    BackpropReadout,
    ReadoutNet,
    RidgeReadout,
    TrainConfig,
    fit_backprop,
)
from .data import (
    Dataset,
    Sample,
    TaskSpec,
    gen_delayed_xor,
    gen_narma10,
    load_dataset,
    make_dataset,
    save_dataset,
)
from .harness import (
    DatasetSpec,
    ExperimentSpec,
    FeatureSpec,
    ReadoutSpec,
    ReservoirSpec,
    TrainedPipeline,
    load_spec,
    memreport,
    run_experiment,
    spec_from_dict,
)
from .model_io import load_model, read_meta, save_model

__version__ = "0.1.0"

__all__ = [
    "RingresError",
    "InputError",
    "SpecFileError",
    "DatasetError",
    "ModelFormatError",
    "NumericalError",
    "spectral_radius",
    "solve_ridge",
    "ReservoirConfig",
    "Reservoir",
    "ReservoirFeaturizer",
    "init_reservoir",
    "RingConfig",
    "RingEnsemble",
    "RingFeaturizer",
    "init_ring",
    "ReadoutNet",
    "TrainConfig",
    "fit_backprop",
    "RidgeReadout",
    "BackpropReadout",
    "TaskSpec",
    "Sample",
    "Dataset",
    "gen_delayed_xor",
    "gen_narma10",
    "make_dataset",
    "save_dataset",
    "load_dataset",
    "ExperimentSpec",
    "ReservoirSpec",
    "FeatureSpec",
    "ReadoutSpec",
    "DatasetSpec",
    "TrainedPipeline",
    "spec_from_dict",
    "load_spec",
    "run_experiment",
    "memreport",
    "save_model",
    "load_model",
    "read_meta",
    "__version__",
]

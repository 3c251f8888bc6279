"""Single leaky echo-state reservoir: seeded construction and state updates.

A reservoir is a fixed random network. Input weights are uniform on
``[-input_scale, +input_scale]``; recurrent weights are uniform on [-1, 1]
rescaled so their largest singular value equals ``spectral_target``. States
evolve by the leaky tanh update

    x_t = (1 - leak_rate) * x_{t-1} + leak_rate * tanh(W_in u_t + W_rec x_{t-1})

and are harvested as a time-major matrix for downstream readouts.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .linalg import scale_to_radius
from .validation import as_matrix, as_vector, check_sequences


@dataclass(frozen=True)
class ReservoirConfig:
    size: int
    input_dim: int
    leak_rate: float = 0.05
    spectral_target: float = 0.1
    input_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if not 0.0 < self.leak_rate <= 1.0:
            raise ValueError(f"leak_rate must be in (0, 1], got {self.leak_rate}")
        if self.spectral_target <= 0.0:
            raise ValueError(
                f"spectral_target must be > 0, got {self.spectral_target}"
            )
        if self.input_scale <= 0.0:
            raise ValueError(f"input_scale must be > 0, got {self.input_scale}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


def leaky_step(W_in, W_rec, leak_rate, x, u):
    """One leaky tanh update. Shared verbatim by single and ring reservoirs."""
    return (1.0 - leak_rate) * x + leak_rate * np.tanh(W_in @ u + W_rec @ x)


@dataclass(frozen=True)
class Reservoir:
    config: ReservoirConfig
    W_in: np.ndarray = field(repr=False)
    W_rec: np.ndarray = field(repr=False)

    def zero_state(self):
        return np.zeros(self.config.size)

    def step(self, state, u):
        """Advance one timestep; the given state and input are not modified."""
        state = as_vector(state, "state")
        u = as_vector(u, "u")
        if state.shape[0] != self.config.size:
            raise ValueError(
                f"state has length {state.shape[0]}, expected {self.config.size}"
            )
        if u.shape[0] != self.config.input_dim:
            raise ValueError(
                f"input has length {u.shape[0]}, expected {self.config.input_dim}"
            )
        return leaky_step(self.W_in, self.W_rec, self.config.leak_rate, state, u)

    def harvest(self, sequence, frame_stride=1, state_stride=1):
        """Drive the reservoir from the zero state and stack visited states.

        Frames ``sequence[::frame_stride]`` are fed through ``step``; of the
        resulting post-update states, every ``state_stride``-th one (starting
        with the first) becomes a row of the output, in time order.
        """
        sequence = as_matrix(sequence, "sequence")
        if sequence.shape[0] < 1:
            raise ValueError("sequence must contain at least one frame")
        if sequence.shape[1] != self.config.input_dim:
            raise ValueError(
                f"sequence has {sequence.shape[1]} channels, "
                f"expected {self.config.input_dim}"
            )
        if frame_stride < 1 or state_stride < 1:
            raise ValueError("strides must be >= 1")
        x = self.zero_state()
        rows = []
        for i, u in enumerate(sequence[::frame_stride]):
            x = leaky_step(self.W_in, self.W_rec, self.config.leak_rate, x, u)
            if i % state_stride == 0:
                rows.append(x)
        return np.stack(rows)


def init_reservoir(config):
    """Build a reservoir from its config; fully determined by config.seed."""
    rng = np.random.default_rng(config.seed)
    W_in = rng.uniform(
        -config.input_scale, config.input_scale, size=(config.size, config.input_dim)
    )
    W_rec = rng.uniform(-1.0, 1.0, size=(config.size, config.size))
    W_rec = scale_to_radius(W_rec, config.spectral_target)
    return Reservoir(config=config, W_in=W_in, W_rec=W_rec)


def _flatten_features(harvested, mode):
    if mode == "trajectory":
        return harvested.ravel()
    if mode == "final-state":
        return harvested[-1]
    raise ValueError(f"unknown feature mode {mode!r}")


class ReservoirFeaturizer(BaseEstimator, TransformerMixin):
    """Turns variable-channel sequences into fixed reservoir features.

    Parameters mirror ReservoirConfig plus the harvest strides and the
    feature mode: "trajectory" flattens the whole harvested state matrix
    row-major, "final-state" keeps only the last harvested state. All input
    sequences must drive the same number of harvested states in trajectory
    mode.
    """

    def __init__(
        self,
        size=100,
        leak_rate=0.05,
        spectral_target=0.1,
        input_scale=1.0,
        frame_stride=1,
        state_stride=1,
        features="trajectory",
        seed=0,
    ):
        self.size = size
        self.leak_rate = leak_rate
        self.spectral_target = spectral_target
        self.input_scale = input_scale
        self.frame_stride = frame_stride
        self.state_stride = state_stride
        self.features = features
        self.seed = seed

    def fit(self, X, y=None):
        seqs, n_channels = check_sequences(X)
        if self.features not in ("trajectory", "final-state"):
            raise ValueError(f"unknown feature mode {self.features!r}")
        self.reservoir_ = init_reservoir(
            ReservoirConfig(
                size=self.size,
                input_dim=n_channels,
                leak_rate=self.leak_rate,
                spectral_target=self.spectral_target,
                input_scale=self.input_scale,
                seed=self.seed,
            )
        )
        self.n_channels_ = n_channels
        return self

    def transform(self, X):
        check_is_fitted(self, "reservoir_")
        seqs, _ = check_sequences(X, n_channels=self.n_channels_)
        feats = []
        for seq in seqs:
            h = self.reservoir_.harvest(seq, self.frame_stride, self.state_stride)
            feats.append(_flatten_features(h, self.features))
        widths = {f.shape[0] for f in feats}
        if len(widths) > 1:
            raise ValueError(
                "sequences produce features of differing widths "
                f"{sorted(widths)}; apply a length policy first"
            )
        return np.stack(feats)

"""Ring of sub-reservoirs coupled through one shared cross-talk matrix.

R equally sized sub-reservoirs each see the full input. With cross-talk
enabled, sub r additionally receives

    delta_r = beta * (tanh(W_shared x_{r-1}) + tanh(W_shared x_{r+1}))

from its ring neighbors (indices wrap around), added after the leaky tanh
update. One W_shared serves every sub, so cross-talk memory cost does not
grow with R. With beta = 0 or the ring disabled, the subs evolve exactly
as independent reservoirs.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .linalg import scale_to_radius
from .reservoir import ReservoirConfig, _flatten_features, init_reservoir, leaky_step
from .validation import as_matrix, as_vector, check_sequences


@dataclass(frozen=True)
class RingConfig:
    n_subs: int
    sub_size: int
    input_dim: int
    leak_rate: float = 0.05
    spectral_target: float = 0.1
    input_scale: float = 1.0
    cross_talk: float = 0.005
    ring_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_subs < 1:
            raise ValueError(f"n_subs must be >= 1, got {self.n_subs}")
        if self.cross_talk < 0.0:
            raise ValueError(f"cross_talk must be >= 0, got {self.cross_talk}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        # remaining fields share the single-reservoir rules
        self.sub_config(0)

    def sub_config(self, r):
        return ReservoirConfig(
            size=self.sub_size,
            input_dim=self.input_dim,
            leak_rate=self.leak_rate,
            spectral_target=self.spectral_target,
            input_scale=self.input_scale,
            seed=derive_sub_seed(self.seed, r),
        )


def derive_sub_seed(master_seed, index):
    """Stable per-sub seed: mixes (master_seed, index); index n_subs is W_shared's."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


@dataclass(frozen=True)
class RingEnsemble:
    config: RingConfig
    subs: tuple
    W_shared: np.ndarray = field(repr=False)

    @property
    def state_width(self):
        return self.config.n_subs * self.config.sub_size

    def zero_state(self):
        return np.zeros((self.config.n_subs, self.config.sub_size))

    def delta(self, state, r):
        """Cross-talk term for sub r from its two ring neighbors."""
        cfg = self.config
        if not 0 <= r < cfg.n_subs:
            raise ValueError(f"sub index {r} out of range [0, {cfg.n_subs})")
        left = state[(r - 1) % cfg.n_subs]
        right = state[(r + 1) % cfg.n_subs]
        return cfg.cross_talk * (
            np.tanh(self.W_shared @ left) + np.tanh(self.W_shared @ right)
        )

    def step(self, state, u):
        """Advance every sub one timestep; all reads from the prior state."""
        cfg = self.config
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (cfg.n_subs, cfg.sub_size):
            raise ValueError(
                f"state has shape {state.shape}, "
                f"expected {(cfg.n_subs, cfg.sub_size)}"
            )
        u = as_vector(u, "u")
        if u.shape[0] != cfg.input_dim:
            raise ValueError(
                f"input has length {u.shape[0]}, expected {cfg.input_dim}"
            )
        coupled = cfg.ring_enabled and cfg.cross_talk != 0.0
        new = np.empty_like(state)
        for r, sub in enumerate(self.subs):
            x = leaky_step(sub.W_in, sub.W_rec, cfg.leak_rate, state[r], u)
            if coupled:
                x = x + self.delta(state, r)
            new[r] = x
        return new

    def harvest(self, sequence, frame_stride=1, state_stride=1):
        """As Reservoir.harvest; each row concatenates all sub states."""
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
            x = self.step(x, u)
            if i % state_stride == 0:
                rows.append(x.ravel())
        return np.stack(rows)


def init_ring(config):
    """Build the ensemble; every matrix is determined by config.seed."""
    subs = tuple(
        init_reservoir(config.sub_config(r)) for r in range(config.n_subs)
    )
    shared_rng = np.random.default_rng(derive_sub_seed(config.seed, config.n_subs))
    W_shared = shared_rng.uniform(
        -1.0, 1.0, size=(config.sub_size, config.sub_size)
    )
    W_shared = scale_to_radius(W_shared, config.spectral_target)
    return RingEnsemble(config=config, subs=subs, W_shared=W_shared)


def recurrent_param_count(n_subs, sub_size):
    """Recurrent weights held by a ring: n_subs W_rec blocks plus one W_shared."""
    return n_subs * sub_size**2 + sub_size**2


class RingFeaturizer(BaseEstimator, TransformerMixin):
    """Sequence-to-feature transformer backed by a ring ensemble.

    See ReservoirFeaturizer; `size` here is the per-sub size and rows are
    R*size wide before trajectory flattening.
    """

    def __init__(
        self,
        n_subs=8,
        size=400,
        leak_rate=0.05,
        spectral_target=0.1,
        input_scale=1.0,
        cross_talk=0.005,
        ring_enabled=True,
        frame_stride=1,
        state_stride=1,
        features="trajectory",
        seed=0,
    ):
        self.n_subs = n_subs
        self.size = size
        self.leak_rate = leak_rate
        self.spectral_target = spectral_target
        self.input_scale = input_scale
        self.cross_talk = cross_talk
        self.ring_enabled = ring_enabled
        self.frame_stride = frame_stride
        self.state_stride = state_stride
        self.features = features
        self.seed = seed

    def fit(self, X, y=None):
        seqs, n_channels = check_sequences(X)
        if self.features not in ("trajectory", "final-state"):
            raise ValueError(f"unknown feature mode {self.features!r}")
        self.ensemble_ = init_ring(
            RingConfig(
                n_subs=self.n_subs,
                sub_size=self.size,
                input_dim=n_channels,
                leak_rate=self.leak_rate,
                spectral_target=self.spectral_target,
                input_scale=self.input_scale,
                cross_talk=self.cross_talk,
                ring_enabled=self.ring_enabled,
                seed=self.seed,
            )
        )
        self.n_channels_ = n_channels
        return self

    def transform(self, X):
        check_is_fitted(self, "ensemble_")
        seqs, _ = check_sequences(X, n_channels=self.n_channels_)
        feats = []
        for seq in seqs:
            h = self.ensemble_.harvest(seq, self.frame_stride, self.state_stride)
            feats.append(_flatten_features(h, self.features))
        widths = {f.shape[0] for f in feats}
        if len(widths) > 1:
            raise ValueError(
                "sequences produce features of differing widths "
                f"{sorted(widths)}; apply a length policy first"
            )
        return np.stack(feats)

"""Small feed-forward regressor replicating the learned mapping stage.

A network per parameter group maps distance features to normalized sound
parameters; trained models are interchangeable with the closed-form
mappings in `sonification` (clamping to legal ranges happens at use time,
outside the network).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, TrainingDivergedError, UnsupportedVersionError, ValidationError
from .geometry import DistanceFeatures, Shape2D, Seed, compute_features
from .sonification import MappingConfig, ModelKind, SoundParams, map_params

MODEL_FILE_VERSION = 1


@dataclass
class Mlp:
    """Fully-connected net: tanh hidden layers, identity output."""

    layer_sizes: list[int]
    weights: list[np.ndarray]  # weights[i] has shape (sizes[i+1], sizes[i])
    biases: list[np.ndarray]

    def copy(self) -> "Mlp":
        return Mlp(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass(frozen=True)
class TrainingSet:
    features: np.ndarray  # (n, n_in)
    targets: np.ndarray  # (n, n_out)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2 or len(x) != len(y) or len(x) == 0:
            raise ValidationError("training set needs matching non-empty 2-D arrays")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return len(self.features)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 2000
    batch_size: int | None = None  # None = full batch
    rng_seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")


def init_mlp(layer_sizes, rng_seed: int = 0) -> Mlp:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValidationError("layer sizes must be >= 1 each, at least [n_in, n_out]")
    rng = np.random.default_rng(rng_seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_sizes=sizes, weights=weights, biases=biases)


def _forward_cached(m: Mlp, x: np.ndarray):
    """Returns layer activations, input first, output last. x is (b, n_in)."""
    acts = [x]
    h = x
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ w.T + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return acts


def forward(m: Mlp, x) -> np.ndarray:
    """Forward pass; accepts a single vector or a (b, n_in) batch."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != m.layer_sizes[0]:
        raise ValidationError(f"expected input dim {m.layer_sizes[0]}, got {arr.shape[1]}")
    out = _forward_cached(m, arr)[-1]
    return out[0] if single else out


def loss(m: Mlp, x, y) -> float:
    """Mean over examples of 0.5 * squared error summed over outputs."""
    err = forward(m, x) - np.asarray(y, dtype=np.float64)
    return float(0.5 * (err * err).sum(axis=-1).mean())


def backprop_gradient(m: Mlp, batch_x, batch_y):
    """Gradient of `loss` w.r.t. every weight and bias.

    For a single example the output-layer weight gradient is the classic
    (prediction - target) outer hidden-activation.
    """
    x = np.atleast_2d(np.asarray(batch_x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(batch_y, dtype=np.float64))
    if len(x) == 0:
        raise ValidationError("batch must be non-empty")
    if x.shape[1] != m.layer_sizes[0] or y.shape[1] != m.layer_sizes[-1]:
        raise ValidationError("batch dimensions do not match the network")
    b = len(x)
    acts = _forward_cached(m, x)
    delta = (acts[-1] - y) / b
    grad_w = [None] * len(m.weights)
    grad_b = [None] * len(m.biases)
    for i in range(len(m.weights) - 1, -1, -1):
        grad_w[i] = delta.T @ acts[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ m.weights[i]) * (1.0 - acts[i] * acts[i])
    return grad_w, grad_b


def train(m: Mlp, data: TrainingSet, cfg: TrainConfig) -> tuple[Mlp, list[float]]:
    """SGD with momentum; returns the trained copy and per-epoch loss."""
    if data.features.shape[1] != m.layer_sizes[0] or data.targets.shape[1] != m.layer_sizes[-1]:
        raise ValidationError("training set dimensions do not match the network")
    model = m.copy()
    if cfg.epochs == 0:
        return model, []
    rng = np.random.default_rng(cfg.rng_seed)
    n = len(data)
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    history = []
    for _ in range(cfg.epochs):
        order = np.arange(n) if bs == n else rng.permutation(n)
        for lo in range(0, n, bs):
            idx = order[lo : lo + bs]
            gw, gb = backprop_gradient(model, data.features[idx], data.targets[idx])
            for i in range(len(model.weights)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * gw[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * gb[i]
                model.weights[i] += vel_w[i]
                model.biases[i] += vel_b[i]
        epoch_loss = loss(model, data.features, data.targets)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError("loss became non-finite; reduce the learning rate")
        history.append(epoch_loss)
    return model, history


def save_mlp(m: Mlp, path) -> None:
    doc = {
        "version": MODEL_FILE_VERSION,
        "layer_sizes": m.layer_sizes,
        "weights": [w.reshape(-1).tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_mlp(path) -> Mlp:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not a valid model file: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise FormatError("model file is missing its version field")
    if doc["version"] != MODEL_FILE_VERSION:
        raise UnsupportedVersionError(f"unsupported model file version {doc['version']}")
    try:
        sizes = [int(s) for s in doc["layer_sizes"]]
        weights = []
        biases = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            weights.append(np.array(doc["weights"][i], dtype=np.float64).reshape(fan_out, fan_in))
            biases.append(np.array(doc["biases"][i], dtype=np.float64).reshape(fan_out))
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc
    if any(not np.all(np.isfinite(w)) for w in weights) or any(not np.all(np.isfinite(b)) for b in biases):
        raise FormatError("model file contains non-finite parameters")
    return Mlp(layer_sizes=sizes, weights=weights, biases=biases)


# Feature/parameter encodings used when a net stands in for a closed-form
# mapping. Rates and pitches are normalized so every target lives near [0, 1].

def features_to_vector(f: DistanceFeatures, cfg: MappingConfig) -> np.ndarray:
    return np.array(
        [f.d_margin_mm / cfg.range_mm, f.d_seed_mm / cfg.range_mm, 1.0 if f.inside else 0.0]
    )


def params_to_vector(p: SoundParams, cfg: MappingConfig) -> np.ndarray:
    rate_span = cfg.beat_rate_max_hz - cfg.beat_rate_min_hz
    return np.array(
        [
            p.beat_volume,
            (p.beat_rate_hz - cfg.beat_rate_min_hz) / rate_span,
            p.beat_pitch_hz / 1000.0,
            p.timbre_mix,
            p.pad_volume,
            p.pad_pitch_hz / 1000.0,
        ]
    )


def vector_to_params(v, cfg: MappingConfig) -> SoundParams:
    """Decode a network output, clamping to legal parameter ranges."""
    v = np.asarray(v, dtype=np.float64).reshape(6)
    rate_span = cfg.beat_rate_max_hz - cfg.beat_rate_min_hz
    return SoundParams(
        beat_volume=float(np.clip(v[0], 0.0, 1.0)),
        beat_rate_hz=max(cfg.beat_rate_min_hz + v[1] * rate_span, 0.0),
        beat_pitch_hz=max(v[2] * 1000.0, 1.0),
        timbre_mix=float(np.clip(v[3], 0.0, 1.0)),
        pad_volume=float(np.clip(v[4], 0.0, 1.0)),
        pad_pitch_hz=max(v[5] * 1000.0, 1.0),
    )


def record_training_set(
    shape: Shape2D,
    seed: Seed,
    model: ModelKind,
    cfg: MappingConfig,
    n: int,
    rng_seed: int = 0,
    max_seed_distance_mm: float | None = None,
) -> TrainingSet:
    """Sample probe positions around a scene and record the closed-form
    mapping's outputs, mimicking how the original mapping stage was trained
    from recorded probe positions with desired parameter values."""
    rng = np.random.default_rng(rng_seed)
    cap = max_seed_distance_mm if max_seed_distance_mm is not None else 0.75 * cfg.range_mm
    xs = []
    ys = []
    while len(xs) < n:
        ang = rng.uniform(0.0, 2.0 * np.pi)
        r = cap * np.sqrt(rng.uniform(0.0, 1.0))
        p = seed.position + r * np.array([np.cos(ang), np.sin(ang)])
        f = compute_features(shape, seed, p)
        if f.d_seed_mm > cap:
            continue
        xs.append(features_to_vector(f, cfg))
        ys.append(params_to_vector(map_params(model, f, cfg), cfg))
    return TrainingSet(features=np.array(xs), targets=np.array(ys))

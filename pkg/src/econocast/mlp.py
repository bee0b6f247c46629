"""Multi-layer perceptron with supervised online gradient training.

Hidden layers are logistic; the output layer is logistic or linear. Training
runs per-pattern (stochastic) weight updates in fixed row order for exact
reproducibility, minimizing the half-sum-of-squares error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .preprocess import FeatureMatrix, FeatureSpec
from .timeseries import MonthStamp, TimeSeries

__all__ = [
    "ACTIVATIONS",
    "TrainingDiverged",
    "TrainConfig",
    "MlpNetwork",
    "Normalizer",
    "TrainedExpert",
    "init",
    "forward",
    "gradients",
    "train",
    "predict",
    "error_percent",
    "expert_to_dict",
    "expert_from_dict",
    "save_expert",
    "load_expert",
]

ACTIVATIONS = ("logistic", "linear")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the epoch at which it happened."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch} (non-finite loss)")
        self.epoch = epoch


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    return _logistic(z) if kind == "logistic" else z


def _activation_slope(kind: str, a: np.ndarray) -> np.ndarray:
    # Derivative expressed through the activation value itself.
    return a * (1.0 - a) if kind == "logistic" else np.ones_like(a)


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the online training loop."""

    learning_rate: float = 0.05
    init_weight_bound: float = 0.3
    max_epochs: int = 5000
    target_error: float = 0.0
    rng_seed: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.init_weight_bound < 0:
            raise ValueError("init_weight_bound must be >= 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.target_error < 0:
            raise ValueError("target_error must be >= 0")


@dataclass(frozen=True)
class MlpNetwork:
    """Layered weights/biases; weights[l] maps layer l activations to layer l+1."""

    layer_sizes: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    hidden_activation: str = "logistic"
    output_activation: str = "linear"

    def __post_init__(self) -> None:
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise ValueError(f"bad layer sizes {sizes}")
        if self.hidden_activation not in ACTIVATIONS or self.output_activation not in ACTIVATIONS:
            raise ValueError("unknown activation kind")
        ws, bs = [], []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.array(w, dtype=float)
            b = np.array(b, dtype=float)
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l} parameter shapes do not chain with sizes {sizes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("parameters must be finite")
            w.flags.writeable = False
            b.flags.writeable = False
            ws.append(w)
            bs.append(b)
        if len(ws) != len(sizes) - 1:
            raise ValueError("one weight matrix per layer transition required")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init(
    layer_sizes: Sequence[int],
    config: TrainConfig,
    hidden_activation: str = "logistic",
    output_activation: str = "linear",
) -> MlpNetwork:
    """Draw every weight and bias uniformly from [-bound, +bound], seeded."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 3:
        raise ValueError("at least one hidden layer is required")
    rng = np.random.default_rng(config.rng_seed)
    b = config.init_weight_bound
    weights, biases = [], []
    for l in range(len(sizes) - 1):
        weights.append(rng.uniform(-b, b, size=(sizes[l + 1], sizes[l])))
        biases.append(rng.uniform(-b, b, size=sizes[l + 1]))
    return MlpNetwork(sizes, tuple(weights), tuple(biases), hidden_activation, output_activation)


def _layer_kinds(net: MlpNetwork) -> List[str]:
    n_layers = len(net.weights)
    return [net.hidden_activation] * (n_layers - 1) + [net.output_activation]


def forward(net: MlpNetwork, x: Sequence[float]) -> np.ndarray:
    """Single forward pass; input length must equal the input layer size."""
    a = np.asarray(x, dtype=float)
    if a.shape != (net.n_in,):
        raise ValueError(f"input length {a.shape} does not match n_in {net.n_in}")
    for kind, w, b in zip(_layer_kinds(net), net.weights, net.biases):
        a = _activate(kind, w @ a + b)
    return a


def _forward_batch(net: MlpNetwork, X: np.ndarray) -> np.ndarray:
    a = X
    for kind, w, b in zip(_layer_kinds(net), net.weights, net.biases):
        a = _activate(kind, a @ w.T + b)
    return a


def gradients(
    net: MlpNetwork, x: Sequence[float], target: Sequence[float]
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Exact gradient of E = 1/2 * sum((out - target)^2) for one pattern,
    via reverse accumulation. Returns (dWs, dbs) matching net layout."""
    x = np.asarray(x, dtype=float)
    target = np.asarray(target, dtype=float)
    if x.shape != (net.n_in,) or target.shape != (net.n_out,):
        raise ValueError("input/target dimensions do not match the network")
    kinds = _layer_kinds(net)
    activations = [x]
    for kind, w, b in zip(kinds, net.weights, net.biases):
        activations.append(_activate(kind, w @ activations[-1] + b))
    delta = (activations[-1] - target) * _activation_slope(kinds[-1], activations[-1])
    dws: List[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    dbs: List[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for l in range(len(net.weights) - 1, -1, -1):
        dws[l] = np.outer(delta, activations[l])
        dbs[l] = delta
        if l > 0:
            delta = (net.weights[l].T @ delta) * _activation_slope(kinds[l - 1], activations[l])
    return dws, dbs


@dataclass(frozen=True)
class Normalizer:
    """Per-column affine maps fitted on training rows only.

    Inputs are standardized; the target is standardized for a linear output
    unit and mapped into [0.1, 0.9] for a logistic one.
    """

    input_shift: np.ndarray
    input_scale: np.ndarray
    target_shift: float
    target_scale: float

    def __post_init__(self) -> None:
        shift = np.array(self.input_shift, dtype=float)
        scale = np.array(self.input_scale, dtype=float)
        if shift.shape != scale.shape or shift.ndim != 1:
            raise ValueError("inconsistent normalizer shapes")
        if not np.all(scale > 0) or self.target_scale <= 0:
            raise ValueError("normalizer scales must be > 0")
        shift.flags.writeable = False
        scale.flags.writeable = False
        object.__setattr__(self, "input_shift", shift)
        object.__setattr__(self, "input_scale", scale)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, output_activation: str) -> "Normalizer":
        shift = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        if output_activation == "logistic":
            lo, hi = float(y.min()), float(y.max())
            span = hi - lo
            t_scale = span / 0.8 if span > 0 else 1.0
            t_shift = lo - 0.1 * t_scale
        else:
            t_shift = float(y.mean())
            t_scale = float(y.std()) or 1.0
        return cls(shift, scale, t_shift, t_scale)

    def normalize_inputs(self, X: np.ndarray) -> np.ndarray:
        return (X - self.input_shift) / self.input_scale

    def normalize_target(self, y: np.ndarray) -> np.ndarray:
        return (y - self.target_shift) / self.target_scale

    def denormalize_target(self, y: np.ndarray) -> np.ndarray:
        return y * self.target_scale + self.target_shift


@dataclass(frozen=True)
class TrainedExpert:
    """A trained network plus everything needed to reproduce its predictions."""

    network: MlpNetwork
    normalizer: Normalizer
    features: Tuple[FeatureSpec, ...]
    train_range: Tuple[MonthStamp, MonthStamp]
    final_train_error: float
    rng_seed: int
    test_range: Tuple[MonthStamp, MonthStamp] | None = None


def train(net: MlpNetwork, matrix: FeatureMatrix, config: TrainConfig) -> TrainedExpert:
    """Online gradient descent: one update per pattern, fixed order, one full
    pass per epoch. Stops once the epoch-end mean squared error (normalized
    space) reaches target_error, or at max_epochs."""
    if net.n_in != matrix.width:
        raise ValueError(f"network expects {net.n_in} inputs, matrix has {matrix.width}")
    if net.n_out != 1:
        raise ValueError("time-series experts have a single output")
    norm = Normalizer.fit(matrix.X, matrix.y, net.output_activation)
    Xn = norm.normalize_inputs(matrix.X)
    yn = norm.normalize_target(matrix.y)

    kinds = _layer_kinds(net)
    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    eta = config.learning_rate
    n_layers = len(ws)
    final_error = float("inf")

    # Overflow inside an epoch is how divergence manifests; it is detected at
    # the epoch-end error check rather than warned about per operation.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.max_epochs + 1):
            for p in range(matrix.rows):
                acts = [Xn[p]]
                for kind, w, b in zip(kinds, ws, bs):
                    acts.append(_activate(kind, w @ acts[-1] + b))
                delta = (acts[-1] - yn[p : p + 1]) * _activation_slope(kinds[-1], acts[-1])
                for l in range(n_layers - 1, -1, -1):
                    if l > 0:
                        next_delta = (ws[l].T @ delta) * _activation_slope(kinds[l - 1], acts[l])
                    ws[l] -= eta * np.outer(delta, acts[l])
                    bs[l] -= eta * delta
                    if l > 0:
                        delta = next_delta
            a = Xn
            for kind, w, b in zip(kinds, ws, bs):
                a = _activate(kind, a @ w.T + b)
            final_error = float(np.mean((a[:, 0] - yn) ** 2))
            if not np.isfinite(final_error):
                raise TrainingDiverged(epoch)
            if final_error <= config.target_error:
                break

    trained = MlpNetwork(
        net.layer_sizes, tuple(ws), tuple(bs), net.hidden_activation, net.output_activation
    )
    return TrainedExpert(
        network=trained,
        normalizer=norm,
        features=matrix.specs,
        train_range=(matrix.start, matrix.end),
        final_train_error=final_error,
        rng_seed=config.rng_seed,
    )


def predict(expert: TrainedExpert, matrix: FeatureMatrix) -> TimeSeries:
    """Row-wise normalized forward pass, denormalized and dated by the matrix."""
    if matrix.specs != expert.features:
        raise ValueError("matrix columns do not match the expert's features")
    out = _forward_batch(expert.network, expert.normalizer.normalize_inputs(matrix.X))
    return TimeSeries(matrix.start, expert.normalizer.denormalize_target(out[:, 0]))


def error_percent(expert: TrainedExpert, matrix: FeatureMatrix) -> float:
    """100 * mean(|prediction - target|) / mean(|target|) over the matrix rows."""
    denom = float(np.mean(np.abs(matrix.y)))
    if denom == 0:
        raise ValueError("error percentage undefined for an all-zero target")
    preds = predict(expert, matrix).values
    return 100.0 * float(np.mean(np.abs(preds - matrix.y))) / denom


# ---------------------------------------------------------------------------
# Serialization (JSON, bit-exact round trip)
# ---------------------------------------------------------------------------


def expert_to_dict(expert: TrainedExpert) -> Dict[str, object]:
    net = expert.network
    return {
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": net.hidden_activation,
        "output_activation": net.output_activation,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "normalizer": {
            "input_shift": expert.normalizer.input_shift.tolist(),
            "input_scale": expert.normalizer.input_scale.tolist(),
            "target_shift": expert.normalizer.target_shift,
            "target_scale": expert.normalizer.target_scale,
        },
        "features": [spec.to_dict() for spec in expert.features],
        "train_range": [str(expert.train_range[0]), str(expert.train_range[1])],
        "test_range": (
            [str(expert.test_range[0]), str(expert.test_range[1])] if expert.test_range else None
        ),
        "final_train_error": expert.final_train_error,
        "rng_seed": expert.rng_seed,
    }


def expert_from_dict(data: Mapping[str, object]) -> TrainedExpert:
    net = MlpNetwork(
        tuple(data["layer_sizes"]),
        tuple(np.array(w, dtype=float) for w in data["weights"]),
        tuple(np.array(b, dtype=float) for b in data["biases"]),
        str(data["hidden_activation"]),
        str(data["output_activation"]),
    )
    nd = data["normalizer"]
    norm = Normalizer(
        np.array(nd["input_shift"], dtype=float),
        np.array(nd["input_scale"], dtype=float),
        float(nd["target_shift"]),
        float(nd["target_scale"]),
    )
    features = tuple(FeatureSpec.from_dict(f) for f in data["features"])
    tr = data["train_range"]
    test = data.get("test_range")
    return TrainedExpert(
        network=net,
        normalizer=norm,
        features=features,
        train_range=(MonthStamp.parse(tr[0]), MonthStamp.parse(tr[1])),
        final_train_error=float(data["final_train_error"]),
        rng_seed=int(data["rng_seed"]),
        test_range=(MonthStamp.parse(test[0]), MonthStamp.parse(test[1])) if test else None,
    )


def save_expert(expert: TrainedExpert, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(expert_to_dict(expert), fh, indent=1)
        fh.write("\n")


def load_expert(path: str) -> TrainedExpert:
    with open(path, "r", encoding="utf-8") as fh:
        return expert_from_dict(json.load(fh))

# nested_covar/services/smoothers/mlp.py
"""
Sigmoid multilayer perceptron trained with mini-batch Adam on mean squared error.

Layers: input -> L sigmoid layers of `width` units -> linear output.
Every weight matrix is clipped to [-w, w] after each step; biases are not.
"""
import logging
import time
from typing import List, Sequence, Tuple

import numpy as np

from ...errors import DomainError, Diverged
from ...models.surface import SmootherFamily, SurfaceModel, TrainingSet
from ...utils.timing import recorded_elapsed
from ..rng import Stream, generator

logger = logging.getLogger(__name__)

_BETA1 = 0.9
_BETA2 = 0.999
_EPSILON = 1e-8
# Broadcast cells per evaluation block
_EVAL_CELLS = 4_000_000


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_params(d: int, layers: int, width: int, weight_bound: float, seed: int) -> List[np.ndarray]:
    """[W1, b1, ..., W_out, b_out]; hidden weights uniform in +-1/sqrt(fan_in), output layer zero"""
    gen = generator(seed, Stream.TRAINING, "init")
    params = []
    fan_in = d
    for _ in range(layers):
        limit = min(1.0 / np.sqrt(fan_in), weight_bound)
        params.append(gen.uniform(-limit, limit, (fan_in, width)))
        params.append(np.zeros(width))
        fan_in = width
    params.append(np.zeros((fan_in, 1)))
    params.append(np.zeros(1))
    return params


def forward(params: Sequence[np.ndarray], x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    activations = [x]
    a = x
    for i in range(0, len(params) - 2, 2):
        a = _sigmoid(a @ params[i] + params[i + 1])
        activations.append(a)
    out = a @ params[-2] + params[-1]
    return out[:, 0], activations


def loss_and_gradient(params: Sequence[np.ndarray], x: np.ndarray, y: np.ndarray) -> Tuple[float, List[np.ndarray]]:
    """Mean squared error and its gradient with respect to every parameter array"""
    prediction, activations = forward(params, x)
    n = x.shape[0]
    residual = prediction - y
    loss = float(np.mean(residual ** 2))

    grads: List[np.ndarray] = [np.empty(0)] * len(params)
    delta = (2.0 / n) * residual[:, None]
    grads[-2] = activations[-1].T @ delta
    grads[-1] = delta.sum(axis=0)
    upstream = delta @ params[-2].T
    for layer in range(len(params) // 2 - 2, -1, -1):
        a = activations[layer + 1]
        local = upstream * a * (1.0 - a)
        grads[2 * layer] = activations[layer].T @ local
        grads[2 * layer + 1] = local.sum(axis=0)
        upstream = local @ params[2 * layer].T
    return loss, grads


def fit_mlp(
    data: TrainingSet,
    layers: int = 2,
    width: int = 64,
    weight_bound: float = 10.0,
    batch_size: int = 256,
    epochs: int = 200,
    learning_rate: float = 1e-3,
    seed: int = 0,
) -> SurfaceModel:
    """
    Train on standardized inputs and standardized targets.

    Deterministic given `seed`, which is independent of the data seed.

    Raises:
        DomainError: layers or width below 1
        Diverged: the mini-batch loss became non-finite
    """
    began = time.monotonic()
    if layers < 1 or width < 1:
        raise DomainError(f"MLP needs layers >= 1 and width >= 1, got {layers} x {width}")

    x = data.standardized_inputs()
    location = float(data.targets.mean())
    spread = float(data.targets.std())
    scale = spread if spread > 1e-12 * max(abs(location), 1.0) else 1.0
    y = (data.targets - location) / scale

    params = init_params(x.shape[1], layers, width, weight_bound, seed)
    first = [np.zeros_like(p) for p in params]
    second = [np.zeros_like(p) for p in params]
    shuffle = generator(seed, Stream.TRAINING, "batches")
    step = 0
    loss = float("nan")

    for epoch in range(epochs):
        order = shuffle.permutation(x.shape[0])
        for lo in range(0, x.shape[0], batch_size):
            batch = order[lo:lo + batch_size]
            loss, grads = loss_and_gradient(params, x[batch], y[batch])
            if not np.isfinite(loss):
                raise Diverged(f"MLP loss became non-finite at epoch {epoch}, step {step}")
            step += 1
            for i, g in enumerate(grads):
                first[i] = _BETA1 * first[i] + (1 - _BETA1) * g
                second[i] = _BETA2 * second[i] + (1 - _BETA2) * g * g
                m_hat = first[i] / (1 - _BETA1 ** step)
                v_hat = second[i] / (1 - _BETA2 ** step)
                params[i] = params[i] - learning_rate * m_hat / (np.sqrt(v_hat) + _EPSILON)
                if i % 2 == 0:
                    np.clip(params[i], -weight_bound, weight_bound, out=params[i])

    logger.debug(f"MLP fit: {layers}x{width}, {epochs} epochs, last batch loss {loss:.3e}, "
                 f"{time.monotonic() - began:.2f}s")
    return SurfaceModel(
        family=SmootherFamily.MLP,
        parameters={
            **{f"param_{i}": p for i, p in enumerate(params)},
            "target_scale": np.array([location, scale]),
        },
        hyperparameters={
            "layers": layers,
            "width": width,
            "weight_bound": float(weight_bound),
            "batch_size": batch_size,
            "epochs": epochs,
            "learning_rate": float(learning_rate),
            "seed": seed,
        },
        standardization=data.standardization,
        metadata={"sample_size": data.size, "fit_seconds": recorded_elapsed(began)},
    )


def model_params(model: SurfaceModel) -> List[np.ndarray]:
    count = 2 * (int(model.hyperparameters["layers"]) + 1)
    return [model.parameters[f"param_{i}"] for i in range(count)]


def evaluate_mlp(model: SurfaceModel, points: np.ndarray) -> np.ndarray:
    """Row-wise reductions keep each output independent of how points are batched"""
    params = model_params(model)
    standardized = model.standardization.apply(points)
    widest = max(p.shape[0] * p.shape[1] for p in params[0::2])
    step = max(1, _EVAL_CELLS // widest)

    out = np.empty(points.shape[0])
    for lo in range(0, points.shape[0], step):
        a = standardized[lo:lo + step]
        for i in range(0, len(params) - 2, 2):
            a = _sigmoid((a[:, :, None] * params[i][None, :, :]).sum(axis=1) + params[i + 1])
        out[lo:lo + step] = (a * params[-2][:, 0]).sum(axis=1) + params[-1][0]

    location, scale = model.parameters["target_scale"]
    return out * scale + location

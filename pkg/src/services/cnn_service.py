"""
Network composition, backpropagation, SGD training, classification and
finite-difference gradient checking.
"""
from collections import deque
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.models.network import (
    TRAINABLE,
    ForwardCache,
    GradCheckReport,
    GradientSet,
    LabeledExample,
    LayerKind,
    LayerOrder,
    LossKind,
    Mode,
    NetworkParams,
    NetworkSpec,
    TrainConfig,
    TrainRecord,
    TrainReport,
    as_tensor1d,
    expected_shapes,
)
from src.services import cnn_layers as layers
from src.utils.errors import DefinitionError, NumericalError, ShapeError


def init_params(spec: NetworkSpec, seed: int = 0) -> NetworkParams:
    """
    Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases,
    unit batch-norm scale and unit running variance.
    """
    rng = np.random.default_rng(seed)
    sizes = spec.shapes()
    groups = []
    for i, layer in enumerate(spec.layers):
        shapes = expected_shapes(layer, sizes[i], spec.num_classes)
        group: Dict[str, np.ndarray] = {}
        if layer.kind is LayerKind.CONV:
            out_ch, in_ch, K = shapes["weight"]
            limit = np.sqrt(6.0 / (in_ch * K + out_ch * K))
            group["weight"] = rng.uniform(-limit, limit, size=shapes["weight"])
            group["bias"] = np.zeros(out_ch)
        elif layer.kind is LayerKind.FC:
            out_f, in_f = shapes["weight"]
            limit = np.sqrt(6.0 / (in_f + out_f))
            group["weight"] = rng.uniform(-limit, limit, size=shapes["weight"])
            group["bias"] = np.zeros(out_f)
        elif layer.kind is LayerKind.BATCHNORM:
            group = _fresh_batchnorm(sizes[i])
        groups.append(group)
    return NetworkParams(groups)


def zeros_params(spec: NetworkSpec) -> NetworkParams:
    """All weights and biases zero (batch-norm at identity); the output is uniform."""
    sizes = spec.shapes()
    groups = []
    for i, layer in enumerate(spec.layers):
        if layer.kind is LayerKind.BATCHNORM:
            groups.append(_fresh_batchnorm(sizes[i]))
        else:
            groups.append({k: np.zeros(s) for k, s in expected_shapes(layer, sizes[i], spec.num_classes).items()})
    return NetworkParams(groups)


def _fresh_batchnorm(channels: int) -> Dict[str, np.ndarray]:
    return {
        "gamma": np.ones(channels),
        "beta": np.zeros(channels),
        "running_mean": np.zeros(channels),
        "running_var": np.ones(channels),
    }


def network_forward(
    spec: NetworkSpec,
    params: NetworkParams,
    x,
    mode: Mode = Mode.INFER,
    momentum: float = 0.1,
) -> Tuple[np.ndarray, Optional[ForwardCache]]:
    """
    Run the layers in spec order and return class probabilities.

    A ForwardCache is returned only in train mode. The forward pass never
    modifies params; updated batch-norm running statistics travel in the cache.
    """
    mode = Mode(mode)
    h = as_tensor1d(x)
    if h.shape[0] != spec.in_channels:
        raise ShapeError(f"network expects {spec.in_channels} input channels, got {h.shape[0]}")
    cache = ForwardCache() if mode is Mode.TRAIN else None

    for layer, group in zip(spec.layers, params.layers):
        aux: Dict[str, np.ndarray] = {}
        if cache is not None:
            cache.inputs.append(h)
        if layer.kind is LayerKind.CONV:
            out = layers.conv1d_forward(h, group["weight"], group["bias"])
        elif layer.kind is LayerKind.RELU:
            out = layers.relu(h)
            aux["mask"] = h > 0
        elif layer.kind is LayerKind.BATCHNORM:
            out, aux = layers.batchnorm_forward(h, group, mode, momentum=momentum)
        elif layer.kind is LayerKind.GAP:
            out = layers.global_avg_pool(h)
        else:
            out = layers.fc_forward(h, group["weight"], group["bias"])
        if cache is not None:
            cache.aux.append(aux)
        h = out

    probs = layers.softmax(h)
    if cache is not None:
        cache.logits, cache.probs = h, probs
    return probs, cache


def network_backward(
    spec: NetworkSpec,
    params: NetworkParams,
    cache: ForwardCache,
    target: np.ndarray,
    loss_kind: LossKind = LossKind.CROSS_ENTROPY,
) -> GradientSet:
    """Analytic gradients of the loss for every trainable array, from a train-mode cache."""
    if cache is None or cache.probs is None or len(cache.inputs) != len(spec.layers):
        raise ShapeError("backward pass needs the train-mode cache of a matching forward pass")

    grads: List[Dict[str, np.ndarray]] = [dict() for _ in spec.layers]
    delta = layers.loss_grad_logits(cache.probs, np.asarray(target, dtype=np.float64), loss_kind)
    for i in range(len(spec.layers) - 1, -1, -1):
        layer, group, h_in, aux = spec.layers[i], params.layers[i], cache.inputs[i], cache.aux[i]
        if layer.kind is LayerKind.FC:
            delta, grads[i]["weight"], grads[i]["bias"] = layers.fc_backward(delta, h_in, group["weight"])
        elif layer.kind is LayerKind.GAP:
            delta = layers.global_avg_pool_backward(delta, h_in.shape[1])
        elif layer.kind is LayerKind.BATCHNORM:
            delta, grads[i]["gamma"], grads[i]["beta"] = layers.batchnorm_backward(delta, group["gamma"], aux)
        elif layer.kind is LayerKind.RELU:
            delta = layers.relu_backward(delta, h_in)
        else:
            delta, grads[i]["weight"], grads[i]["bias"] = layers.conv1d_backward(delta, h_in, group["weight"])
    return GradientSet(grads)


def commit_running_stats(spec: NetworkSpec, params: NetworkParams, cache: ForwardCache) -> None:
    """Store the batch-norm running statistics carried by a train-mode cache."""
    for layer, group, aux in zip(spec.layers, params.layers, cache.aux):
        if layer.kind is LayerKind.BATCHNORM:
            group["running_mean"] = aux["running_mean"]
            group["running_var"] = aux["running_var"]


def sgd_step(spec: NetworkSpec, params: NetworkParams, grads: GradientSet, learning_rate: float) -> NetworkParams:
    """In-place update v <- v - lr * dE/dv on every trainable array."""
    for i, layer in enumerate(spec.layers):
        for key in TRAINABLE.get(layer.kind, ()):
            g = grads.layers[i].get(key)
            if g is None:
                continue
            if g.shape != params.layers[i][key].shape:
                raise ShapeError(f"gradient {g.shape} does not match layer {i} '{key}' {params.layers[i][key].shape}")
            params.layers[i][key] -= learning_rate * g
    return params


def _mean_gradients(grad_sets: Sequence[GradientSet]) -> GradientSet:
    if len(grad_sets) == 1:
        return grad_sets[0]
    layers_out = []
    for per_layer in zip(*(g.layers for g in grad_sets)):
        layers_out.append({k: np.mean([d[k] for d in per_layer], axis=0) for k in per_layer[0]})
    return GradientSet(layers_out)


def classify(spec: NetworkSpec, params: NetworkParams, x) -> Tuple[int, np.ndarray]:
    """Most probable class (lowest index on ties) and the probability vector."""
    probs, _ = network_forward(spec, params, x, Mode.INFER)
    return int(np.argmax(probs)), probs


def accuracy(spec: NetworkSpec, params: NetworkParams, examples: Sequence[LabeledExample]) -> Optional[float]:
    if not examples:
        return None
    hits = sum(1 for ex in examples if classify(spec, params, ex.input)[0] == ex.class_index)
    return hits / len(examples)


def _check_classes(spec: NetworkSpec, examples: Sequence[LabeledExample]) -> None:
    if not examples:
        raise DefinitionError("training set is empty")
    present = np.zeros(spec.num_classes, dtype=int)
    for ex in examples:
        if ex.target.shape != (spec.num_classes,):
            raise ShapeError(f"target of '{ex.name}' has {ex.target.size} classes, network has {spec.num_classes}")
        present[ex.class_index] += 1
    empty = [c for c in range(spec.num_classes) if present[c] == 0]
    if empty:
        raise DefinitionError(f"no training examples for class indices {empty}")


def train(
    spec: NetworkSpec,
    train_set: Sequence[LabeledExample],
    cfg: TrainConfig,
    params: Optional[NetworkParams] = None,
    validate_set: Sequence[LabeledExample] = (),
) -> Tuple[NetworkParams, TrainReport]:
    """
    Mini-batch SGD over shuffled epochs.

    Every iteration records the batch loss and the training accuracy over the
    trailing epoch-sized window; the last iteration of each epoch also records
    validation accuracy (infer mode).

    Args:
        spec: Network topology
        train_set: Labeled examples, at least one per class
        cfg: Epochs, batch size, learning rate schedule, loss and seeds
        params: Starting parameters (default: Glorot init from cfg.weight_init_seed)
        validate_set: Examples scored at the end of every epoch

    Returns:
        Trained parameters and the per-iteration report
    """
    _check_classes(spec, train_set)
    params = init_params(spec, cfg.weight_init_seed) if params is None else params.copy()
    params.check(spec)
    rng = np.random.default_rng(cfg.shuffle_seed)
    report = TrainReport(config=cfg, train_size=len(train_set), validate_size=len(validate_set))
    window = deque(maxlen=len(train_set))
    iteration = 0

    for epoch in range(cfg.epochs):
        lr = cfg.lr_schedule.rate(cfg.learning_rate, epoch)
        order = rng.permutation(len(train_set))
        for start in range(0, len(order), cfg.mini_batch):
            batch = [train_set[j] for j in order[start:start + cfg.mini_batch]]
            iteration += 1
            grad_sets, losses = [], []
            for ex in batch:
                probs, cache = network_forward(spec, params, ex.input, Mode.TRAIN, momentum=cfg.momentum_bn)
                losses.append(layers.loss(probs, ex.target, cfg.loss))
                window.append(int(np.argmax(probs)) == ex.class_index)
                grad_sets.append(network_backward(spec, params, cache, ex.target, cfg.loss))
                commit_running_stats(spec, params, cache)
            grads = _mean_gradients(grad_sets)
            batch_loss = float(np.mean(losses))
            if not np.isfinite(batch_loss) or not grads.is_finite():
                raise NumericalError("training diverged", step=iteration)
            sgd_step(spec, params, grads, lr)
            report.records.append(TrainRecord(
                iteration=iteration,
                epoch=epoch + 1,
                train_loss=batch_loss,
                train_acc=float(np.mean(window)),
            ))

        report.records[-1].val_acc = accuracy(spec, params, validate_set)
        last = report.records[-1]
        logger.debug(
            f"epoch {epoch + 1}/{cfg.epochs}: lr={lr:.3g} loss={last.train_loss:.4f} "
            f"train_acc={last.train_acc:.3f} val_acc={last.val_acc}"
        )
    return params, report


def _loss_at(spec, params, example, loss_kind) -> Tuple[float, List[np.ndarray]]:
    probs, cache = network_forward(spec, params, example.input, Mode.TRAIN)
    masks = [aux["mask"] for aux in cache.aux if "mask" in aux]
    return layers.loss(probs, example.target, loss_kind), masks


def _same_masks(a: List[np.ndarray], b: List[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    spec: NetworkSpec,
    params: NetworkParams,
    example: LabeledExample,
    h: float = 1e-5,
    tol: float = 1e-4,
    loss_kind: LossKind = LossKind.CROSS_ENTROPY,
    max_params: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare analytic gradients with central differences.

    Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-5).
    Coordinates whose perturbation flips a ReLU (a kink inside [-h, h]) are
    skipped since the finite difference is not a derivative there.

    Args:
        max_params: Check a seeded random subset of this many coordinates (all when None)
    """
    work = params.copy()
    probs, cache = network_forward(spec, work, example.input, Mode.TRAIN)
    grads = network_backward(spec, work, cache, example.target, loss_kind)
    base_masks = [aux["mask"] for aux in cache.aux if "mask" in aux]

    coords = [
        (i, key, idx)
        for i, key, arr in work.iter_trainable(spec)
        for idx in np.ndindex(arr.shape)
    ]
    if max_params is not None and max_params < len(coords):
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(len(coords), size=max_params, replace=False))
        coords = [coords[j] for j in picked]

    worst, max_err, skipped = None, 0.0, 0
    violations = []
    for i, key, idx in coords:
        arr = work.layers[i][key]
        original = arr[idx]
        arr[idx] = original + h
        e_plus, m_plus = _loss_at(spec, work, example, loss_kind)
        arr[idx] = original - h
        e_minus, m_minus = _loss_at(spec, work, example, loss_kind)
        arr[idx] = original
        if not (_same_masks(m_plus, base_masks) and _same_masks(m_minus, base_masks)):
            skipped += 1
            continue

        numeric = (e_plus - e_minus) / (2.0 * h)
        analytic = float(grads.layers[i][key][idx])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-5)
        if err > max_err:
            max_err, worst = err, (i, key, tuple(int(j) for j in idx))
        if err > tol:
            violations.append((i, key, tuple(int(j) for j in idx), err))

    if skipped:
        logger.debug(f"grad check skipped {skipped} coordinates at ReLU kinks")
    return GradCheckReport(
        max_rel_error=max_err,
        worst=worst,
        checked=len(coords) - skipped,
        tol=tol,
        violations=violations,
        skipped=skipped,
    )


def random_network(seed: int, max_blocks: int = 2, max_channels: int = 4,
                   max_kernel: int = 4) -> Tuple[NetworkSpec, NetworkParams, LabeledExample]:
    """
    Small random network, parameters and labeled example for gradient checks.

    Biases and batch-norm scale/shift are randomized too so that every
    parameter group carries a non-trivial gradient.
    """
    rng = np.random.default_rng(seed)
    in_channels = int(rng.integers(1, 3))
    num_classes = int(rng.integers(2, 4))
    channels = [int(rng.integers(2, max_channels + 1)) for _ in range(int(rng.integers(1, max_blocks + 1)))]
    spec = NetworkSpec.conv_blocks(
        in_channels=in_channels,
        num_classes=num_classes,
        kernel_length=int(rng.integers(1, max_kernel + 1)),
        channels=channels,
        order=LayerOrder.BN_RELU,
        name=f"random-{seed}",
    )
    params = init_params(spec, seed)
    for layer, group in zip(spec.layers, params.layers):
        if layer.kind in (LayerKind.CONV, LayerKind.FC):
            group["bias"] = 0.1 * rng.standard_normal(group["bias"].shape)
        elif layer.kind is LayerKind.BATCHNORM:
            group["gamma"] = rng.uniform(0.5, 1.5, size=group["gamma"].shape)
            group["beta"] = 0.1 * rng.standard_normal(group["beta"].shape)
    length = int(rng.integers(8, 17))
    x = rng.standard_normal((in_channels, length))
    example = LabeledExample.from_index(x, int(rng.integers(num_classes)), num_classes, name=f"random-{seed}")
    return spec, params, example

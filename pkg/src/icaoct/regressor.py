"""Convolutional regressor mapping FFT stacks to dispersion profiles.

Architecture: repeated conv(3x3, same) -> batch norm -> ReLU -> 2x2 pool
blocks, flatten, fully connected layers with layer normalization and
dropout, and a sigmoid output of one value per depth pixel. Trained with
mean absolute error and Adam at the tuned configuration (batch norm after
conv, max pooling, one hidden fully connected layer, layer normalization,
dropout 0.1, learning rate 1e-4, batch size 16).

The default configuration is a desk-scale instance (16x128 stacks,
128-pixel profiles) of the same block structure; the full-scale geometry
(50x1024 stacks, 14336 hidden units) is expressible via paper_scale().
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import layers

CHECKPOINT_MAGIC = b"ICAM"
CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during optimization."""


@dataclass(frozen=True)
class RegressorConfig:
    """Network geometry plus optimization hyper-parameters."""

    rows: int = 16
    cols: int = 128
    conv_blocks: tuple[tuple[int, int, bool], ...] = ((8, 3, True), (16, 3, True))
    pool: str = "max"
    fc_layers: int = 1
    fc_units: int = 256
    fc_norm: str = "layer"
    dropout: float = 0.1
    output_len: int = 128
    loss: str = "mae"
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    batch_size: int = 16

    def __post_init__(self):
        if not (0.0 <= self.dropout <= 0.5):
            raise ValueError(f"dropout must be in [0, 0.5], got {self.dropout}")
        if self.fc_layers < 1:
            raise ValueError(f"need at least one fully connected layer, got {self.fc_layers}")
        if self.pool not in ("max", "avg"):
            raise ValueError(f"unknown pooling {self.pool!r}")
        if self.fc_norm not in ("batch", "layer", "none"):
            raise ValueError(f"unknown fc normalization {self.fc_norm!r}")
        if self.loss not in ("mae", "mse", "bce"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.optimizer not in ("adam", "rmsprop", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.conv_blocks:
            raise ValueError("need at least one conv block")
        for channels, kernel, _ in self.conv_blocks:
            if channels < 1 or kernel < 1 or kernel % 2 == 0:
                raise ValueError(f"bad conv block ({channels}, {kernel})")
        if min(self.pooled_shape()) < 1:
            raise ValueError(
                f"input {self.rows}x{self.cols} collapses to zero after "
                f"{len(self.conv_blocks)} pooling stages")
        if self.batch_size < 1 or self.output_len < 1 or self.fc_units < 1:
            raise ValueError("batch_size, output_len and fc_units must be positive")

    def pooled_shape(self) -> tuple[int, int]:
        h, w = self.rows, self.cols
        for _ in self.conv_blocks:
            h, w = h // 2, w // 2
        return h, w

    @property
    def flat_features(self) -> int:
        h, w = self.pooled_shape()
        return h * w * self.conv_blocks[-1][0]

    @classmethod
    def paper_scale(cls) -> "RegressorConfig":
        """Full-size configuration for 50x1024 stacks (not exercised by tests)."""
        return cls(rows=50, cols=1024,
                   conv_blocks=((64, 3, True), (128, 3, True),
                                (256, 3, True), (512, 3, True)),
                   fc_units=14336, output_len=1024)

    def to_json(self) -> str:
        d = self.__dict__.copy()
        d["conv_blocks"] = [list(b) for b in self.conv_blocks]
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RegressorConfig":
        d = json.loads(text)
        d["conv_blocks"] = tuple(tuple(b) for b in d["conv_blocks"])
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)


class RegressorModel:
    """Parameter container with explicit forward/backward passes.

    Parameters live in `params` keyed by name in declaration order
    (conv{i}_w/b, bn{i}_gamma/beta per block, then fc{j}_w/b and
    ln{j}_gamma/beta per hidden layer, then out_w/out_b); batch-norm
    running statistics live in `running`. Optimizer state is lazily
    allocated on the first update and is not checkpointed.
    """

    def __init__(self, cfg: RegressorConfig, seed: int, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.mode = "eval"
        self.params: dict[str, np.ndarray] = {}
        self.running: dict[str, np.ndarray] = {}
        self.opt_state: dict[str, np.ndarray] = {}
        self.step_count = 0
        self._dropout_rng = np.random.default_rng(seed + 1)
        rng = np.random.default_rng(seed)

        def uniform(fan_in, shape):
            bound = np.sqrt(6.0 / fan_in)
            return rng.uniform(-bound, bound, size=shape).astype(dtype)

        cin = 1
        for i, (channels, kernel, batch_norm) in enumerate(cfg.conv_blocks):
            self.params[f"conv{i}_w"] = uniform(
                cin * kernel * kernel, (channels, cin, kernel, kernel))
            self.params[f"conv{i}_b"] = np.zeros(channels, dtype=dtype)
            if batch_norm:
                self.params[f"bn{i}_gamma"] = np.ones(channels, dtype=dtype)
                self.params[f"bn{i}_beta"] = np.zeros(channels, dtype=dtype)
                self.running[f"bn{i}_mean"] = np.zeros(channels, dtype=dtype)
                self.running[f"bn{i}_var"] = np.ones(channels, dtype=dtype)
            cin = channels
        features = cfg.flat_features
        for j in range(cfg.fc_layers):
            self.params[f"fc{j}_w"] = uniform(features, (features, cfg.fc_units))
            self.params[f"fc{j}_b"] = np.zeros(cfg.fc_units, dtype=dtype)
            if cfg.fc_norm == "layer":
                self.params[f"ln{j}_gamma"] = np.ones(cfg.fc_units, dtype=dtype)
                self.params[f"ln{j}_beta"] = np.zeros(cfg.fc_units, dtype=dtype)
            features = cfg.fc_units
        self.params["out_w"] = uniform(features, (features, cfg.output_len))
        self.params["out_b"] = np.zeros(cfg.output_len, dtype=dtype)

    @property
    def param_names(self) -> list[str]:
        return list(self.params.keys())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def _forward(self, x: np.ndarray, training: bool):
        cfg = self.cfg
        caches = []
        pool_fwd = (layers.maxpool2d_forward if cfg.pool == "max"
                    else layers.avgpool2d_forward)
        for i, (_, _, batch_norm) in enumerate(cfg.conv_blocks):
            x, c = layers.conv2d_forward(
                x, self.params[f"conv{i}_w"], self.params[f"conv{i}_b"])
            caches.append(("conv", i, c))
            if batch_norm:
                x, c = layers.batchnorm2d_forward(
                    x, self.params[f"bn{i}_gamma"], self.params[f"bn{i}_beta"],
                    self.running[f"bn{i}_mean"], self.running[f"bn{i}_var"],
                    training)
                caches.append(("bn", i, c))
            x, c = layers.relu_forward(x)
            caches.append(("relu", i, c))
            x, c = pool_fwd(x)
            caches.append(("pool", i, c))
        batch = x.shape[0]
        shape_before_flatten = x.shape
        x = x.reshape(batch, -1)
        caches.append(("flatten", 0, shape_before_flatten))
        for j in range(cfg.fc_layers):
            x, c = layers.linear_forward(
                x, self.params[f"fc{j}_w"], self.params[f"fc{j}_b"])
            caches.append(("fc", j, c))
            if cfg.fc_norm == "layer":
                x, c = layers.layernorm_forward(
                    x, self.params[f"ln{j}_gamma"], self.params[f"ln{j}_beta"])
                caches.append(("ln", j, c))
            x, c = layers.relu_forward(x)
            caches.append(("fcrelu", j, c))
            x, c = layers.dropout_forward(x, cfg.dropout, self._dropout_rng, training)
            caches.append(("dropout", j, c))
        z, c = layers.linear_forward(x, self.params["out_w"], self.params["out_b"])
        caches.append(("out", 0, c))
        return layers.sigmoid(z), caches

    def _backward(self, dz: np.ndarray, caches) -> dict[str, np.ndarray]:
        cfg = self.cfg
        grads = {}
        pool_bwd = (layers.maxpool2d_backward if cfg.pool == "max"
                    else layers.avgpool2d_backward)
        d = dz
        for kind, i, cache in reversed(caches):
            if kind == "out":
                d, grads["out_w"], grads["out_b"] = layers.linear_backward(d, cache)
            elif kind == "dropout":
                d = layers.dropout_backward(d, cache)
            elif kind == "fcrelu":
                d = layers.relu_backward(d, cache)
            elif kind == "ln":
                d, grads[f"ln{i}_gamma"], grads[f"ln{i}_beta"] = \
                    layers.layernorm_backward(d, cache)
            elif kind == "fc":
                d, grads[f"fc{i}_w"], grads[f"fc{i}_b"] = layers.linear_backward(d, cache)
            elif kind == "flatten":
                d = d.reshape(cache)
            elif kind == "pool":
                d = pool_bwd(d, cache)
            elif kind == "relu":
                d = layers.relu_backward(d, cache)
            elif kind == "bn":
                d, grads[f"bn{i}_gamma"], grads[f"bn{i}_beta"] = \
                    layers.batchnorm2d_backward(d, cache)
            elif kind == "conv":
                d, grads[f"conv{i}_w"], grads[f"conv{i}_b"] = \
                    layers.conv2d_backward(d, cache)
        return grads

    def _as_batch(self, stacks: np.ndarray) -> np.ndarray:
        x = np.asarray(stacks, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (self.cfg.rows, self.cfg.cols):
            raise ValueError(
                f"stack shape {x.shape} does not match configured "
                f"{self.cfg.rows}x{self.cfg.cols}")
        # Per-row peak normalization: stack amplitudes scale with the
        # squared reflectivities and the squared source envelope of each
        # fragment, neither of which carries dispersion information, and
        # the normalization makes the fringe response of edge rows as
        # visible as the centre rows.
        scale = np.maximum(x.max(axis=2, keepdims=True), 1e-30)
        return (x / scale)[:, None, :, :]

    def apply_gradients(self, grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        lr = cfg.learning_rate
        self.step_count += 1
        for name in self.param_names:
            g = grads[name]
            p = self.params[name]
            if cfg.optimizer == "sgd":
                p -= (lr * g).astype(p.dtype)
            elif cfg.optimizer == "rmsprop":
                v = self.opt_state.setdefault(f"{name}_v", np.zeros_like(p))
                v *= 0.9
                v += 0.1 * g * g
                p -= (lr * g / (np.sqrt(v) + 1e-8)).astype(p.dtype)
            else:  # adam, beta1=0.9, beta2=0.999, eps=1e-8
                m = self.opt_state.setdefault(f"{name}_m", np.zeros_like(p))
                v = self.opt_state.setdefault(f"{name}_v", np.zeros_like(p))
                m *= 0.9
                m += 0.1 * g
                v *= 0.999
                v += 0.001 * g * g
                mhat = m / (1.0 - 0.9 ** self.step_count)
                vhat = v / (1.0 - 0.999 ** self.step_count)
                p -= (lr * mhat / (np.sqrt(vhat) + 1e-8)).astype(p.dtype)

    def copy_params(self) -> dict[str, np.ndarray]:
        return ({n: p.copy() for n, p in self.params.items()},
                {n: r.copy() for n, r in self.running.items()})

    def load_params(self, snapshot) -> None:
        params, running = snapshot
        for n in self.params:
            self.params[n][...] = params[n]
        for n in self.running:
            self.running[n][...] = running[n]


def init_model(cfg: RegressorConfig, seed: int, dtype=np.float32) -> RegressorModel:
    """Deterministically initialized model in eval mode.

    Weights are fan-in-scaled uniform, biases zero, normalization scales
    one and shifts zero.
    """
    return RegressorModel(cfg, seed, dtype)


def forward(model: RegressorModel, stacks, mode: str = "eval") -> np.ndarray:
    """Run the network; dropout is active only in train mode.

    Accepts a single (rows, cols) stack or a batch; returns profiles with
    matching leading shape, values strictly inside (0, 1).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    single = np.asarray(stacks).ndim == 2
    x = model._as_batch(stacks)
    y, _ = model._forward(x, training=(mode == "train"))
    return y[0] if single else y


def train_step(model: RegressorModel, batch: tuple[np.ndarray, np.ndarray],
               cfg: RegressorConfig | None = None) -> float:
    """One optimization step; returns the pre-update batch loss."""
    cfg = cfg or model.cfg
    stacks, labels = batch
    x = model._as_batch(stacks)
    labels = np.asarray(labels, dtype=model.dtype)
    if labels.ndim == 1:
        labels = labels[None]
    y, caches = model._forward(x, training=True)
    loss, dz = layers.loss_and_output_grad(cfg.loss, y, None, labels)
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss {loss} at step {model.step_count}")
    grads = model._backward(dz, caches)
    model.apply_gradients(grads)
    return loss


def evaluate(model: RegressorModel, stacks, labels,
             loss: str | None = None) -> float:
    """Eval-mode loss over a dataset, batched."""
    loss = loss or model.cfg.loss
    labels = np.asarray(labels, dtype=model.dtype)
    total = 0.0
    count = 0
    for start in range(0, len(stacks), model.cfg.batch_size):
        xb = model._as_batch(stacks[start:start + model.cfg.batch_size])
        y, _ = model._forward(xb, training=False)
        value, _ = layers.loss_and_output_grad(loss, y, None, labels[start:start + len(y)])
        total += value * len(y)
        count += len(y)
    return total / max(count, 1)


def train(model: RegressorModel, data: tuple[np.ndarray, np.ndarray],
          epochs: int, cfg: RegressorConfig | None = None,
          val_data: tuple[np.ndarray, np.ndarray] | None = None,
          seed: int = 0, log=None) -> TrainHistory:
    """Seeded mini-batch training loop.

    Shuffles per epoch, records per-epoch mean training loss, eval-mode
    validation loss and wall time, and keeps the parameters of the best
    validation epoch (restored into the model after the last epoch). With
    no validation data the best training epoch is kept instead.
    """
    cfg = cfg or model.cfg
    stacks, labels = data
    if len(stacks) == 0:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(seed)
    history = TrainHistory()
    best = (np.inf, None)
    for epoch in range(epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(stacks))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            losses.append(train_step(model, (stacks[sel], labels[sel]), cfg))
        train_loss = float(np.mean(losses))
        if val_data is not None:
            val_loss = evaluate(model, val_data[0], val_data[1], cfg.loss)
        else:
            val_loss = train_loss
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.seconds.append(time.perf_counter() - t0)
        if val_loss < best[0]:
            best = (val_loss, model.copy_params())
        if log is not None:
            log(f"epoch {epoch + 1}/{epochs} train {train_loss:.5f} "
                f"val {val_loss:.5f} ({history.seconds[-1]:.1f}s)")
    if best[1] is not None:
        model.load_params(best[1])
    return history


def predict(model: RegressorModel, stacks: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Eval-mode predictions in input order."""
    out = []
    batch = model.cfg.batch_size
    stacks = list(stacks)
    for start in range(0, len(stacks), batch):
        xb = model._as_batch(np.stack(stacks[start:start + batch]))
        y, _ = model._forward(xb, training=False)
        out.extend(np.asarray(y))
    return out


def gradient_check(cfg: RegressorConfig, seed: int, epsilon: float = 1e-4) -> float:
    """Max relative error between backprop and central finite differences.

    Runs a tiny double-precision model on one fixed random batch with
    dropout disabled; batch normalization uses the (deterministic) batch
    statistics. The error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    cfg = replace(cfg, dropout=0.0)
    model = init_model(cfg, seed, dtype=np.float64)
    if model.parameter_count() > 5000:
        raise ValueError(
            f"gradient check needs a tiny network, got {model.parameter_count()} parameters")
    rng = np.random.default_rng(seed + 7)
    x = rng.standard_normal((2, 1, cfg.rows, cfg.cols))
    labels = rng.uniform(0.2, 0.8, size=(2, cfg.output_len))

    def loss_at() -> float:
        run = {name: buf.copy() for name, buf in model.running.items()}
        y, _ = model._forward(x, training=True)
        # keep the running buffers untouched by probe evaluations
        for name in model.running:
            model.running[name][...] = run[name]
        value, _ = layers.loss_and_output_grad(cfg.loss, y, None, labels)
        return value

    y, caches = model._forward(x, training=True)
    _, dz = layers.loss_and_output_grad(cfg.loss, y, None, labels)
    analytic = model._backward(dz, caches)

    worst = 0.0
    for name in model.param_names:
        p = model.params[name]
        flat = p.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            lp = loss_at()
            flat[idx] = orig - epsilon
            lm = loss_at()
            flat[idx] = orig
            numeric = (lp - lm) / (2 * epsilon)
            a = analytic[name].reshape(-1)[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def save_checkpoint(model: RegressorModel, path) -> None:
    """ICAM checkpoint: magic, u32 version, u32 config length, config
    JSON, then parameter tensors f32 LE in declaration order followed by
    the batch-norm running statistics."""
    text = model.cfg.to_json().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(text)))
        fh.write(text)
        for name in model.param_names:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f4").tobytes())
        for name in model.running:
            fh.write(np.ascontiguousarray(model.running[name], dtype="<f4").tobytes())


def load_checkpoint(path) -> RegressorModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        version, = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        hlen, = struct.unpack("<I", fh.read(4))
        cfg = RegressorConfig.from_json(fh.read(hlen).decode("utf-8"))
        model = init_model(cfg, seed=0)
        for name in model.param_names:
            shape = model.params[name].shape
            raw = fh.read(4 * int(np.prod(shape)))
            model.params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(
                model.dtype).copy()
        for name in model.running:
            shape = model.running[name].shape
            raw = fh.read(4 * int(np.prod(shape)))
            model.running[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(
                model.dtype).copy()
    return model

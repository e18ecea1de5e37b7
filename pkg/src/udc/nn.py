"""Dense-tensor convolutional text encoder with hand-derived gradients.

The network is: embedding lookup -> parallel 1-d convolutions (one per
kernel size) -> ReLU -> max-pool over time (padding positions excluded)
-> dropout -> fully connected -> softmax. The dropout-layer output is
the document representation handed to the metric loss and to the
uncertainty scorers.

Tensors are plain numpy arrays; every backward rule here is written by
hand and checked against central finite differences in the test suite.
"""
from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError


class DropoutMode(enum.Enum):
    TRAIN_STOCHASTIC = "train_stochastic"
    MC_STOCHASTIC = "mc_stochastic"
    DETERMINISTIC = "deterministic"


STOCHASTIC_MODES = (DropoutMode.TRAIN_STOCHASTIC, DropoutMode.MC_STOCHASTIC)


@dataclass
class EncoderConfig:
    num_classes: int
    embed_dim: int = 200
    kernel_sizes: tuple[int, ...] = (3, 4, 5)
    filters_per_kernel: int = 100
    dropout_p: float = 0.5
    max_len: int = 200
    pad_index: int = 0

    def __post_init__(self):
        self.kernel_sizes = tuple(self.kernel_sizes)
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.max_len < max(self.kernel_sizes):
            raise ValueError("max_len must be >= the largest kernel size")

    @property
    def feature_dim(self) -> int:
        return self.filters_per_kernel * len(self.kernel_sizes)


@dataclass
class Parameter:
    """Value plus gradient and Adam moment buffers, all one shape."""

    value: np.ndarray
    name: str = ""
    grad: np.ndarray = field(init=False)
    m1: np.ndarray = field(init=False)
    m2: np.ndarray = field(init=False)
    step_count: int = 0

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)
        self.m1 = np.zeros_like(self.value)
        self.m2 = np.zeros_like(self.value)


@dataclass
class FeatureBatch:
    """Post-dropout document representations for one batch."""

    features: np.ndarray  # [batch, dim]
    dim: int
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != self.dim:
            raise ValueError("features must be [batch, dim]")
        if self.labels is not None and len(self.labels) != self.features.shape[0]:
            raise ValueError("labels length must equal batch size")


class ModelState:
    """All trainable parameters of the encoder plus the forward cache."""

    def __init__(
        self,
        config: EncoderConfig,
        vocab_size: int,
        rng_seed: int,
        embedding_values: np.ndarray | None = None,
        dtype=np.float32,
        freeze_embedding: bool = False,
    ):
        self.config = config
        self.vocab_size = vocab_size
        self.rng_seed = rng_seed
        self.freeze_embedding = freeze_embedding
        self.class_names: list[str] = [str(i) for i in range(config.num_classes)]
        rng = np.random.default_rng(rng_seed)
        if embedding_values is None:
            emb = rng.normal(0.0, 0.1, size=(vocab_size, config.embed_dim))
            emb[config.pad_index] = 0.0
        else:
            if embedding_values.shape != (vocab_size, config.embed_dim):
                raise ValueError(
                    f"embedding shape {embedding_values.shape} does not match "
                    f"({vocab_size}, {config.embed_dim})"
                )
            emb = embedding_values
        self.embedding = Parameter(np.asarray(emb, dtype=dtype), "embedding")
        self.conv_w: dict[int, Parameter] = {}
        self.conv_b: dict[int, Parameter] = {}
        for s in config.kernel_sizes:
            scale = np.sqrt(2.0 / (s * config.embed_dim))
            w = rng.normal(0.0, scale, size=(config.filters_per_kernel, s, config.embed_dim))
            self.conv_w[s] = Parameter(w.astype(dtype), f"conv{s}_weight")
            self.conv_b[s] = Parameter(
                np.zeros(config.filters_per_kernel, dtype=dtype), f"conv{s}_bias"
            )
        fc_scale = np.sqrt(1.0 / config.feature_dim)
        fc = rng.normal(0.0, fc_scale, size=(config.num_classes, config.feature_dim))
        self.fc_w = Parameter(fc.astype(dtype), "fc_weight")
        self.fc_b = Parameter(np.zeros(config.num_classes, dtype=dtype), "fc_bias")
        self._cache: dict | None = None

    def parameters(self) -> list[Parameter]:
        params = [self.embedding]
        for s in self.config.kernel_sizes:
            params.append(self.conv_w[s])
            params.append(self.conv_b[s])
        params.extend([self.fc_w, self.fc_b])
        return params

    def trainable_parameters(self) -> list[Parameter]:
        return [
            p
            for p in self.parameters()
            if not (self.freeze_embedding and p is self.embedding)
        ]

    def copy(self) -> "ModelState":
        clone = copy.copy(self)
        clone.embedding = copy.deepcopy(self.embedding)
        clone.conv_w = copy.deepcopy(self.conv_w)
        clone.conv_b = copy.deepcopy(self.conv_b)
        clone.fc_w = copy.deepcopy(self.fc_w)
        clone.fc_b = copy.deepcopy(self.fc_b)
        clone.class_names = list(self.class_names)
        clone._cache = None
        return clone


def _windows(x: np.ndarray, size: int) -> np.ndarray:
    # [batch, len, embed] -> [batch, len-size+1, size*embed] sliding windows.
    # The copy is deliberate: the raw strided view overlaps itself, which
    # knocks the subsequent matmuls off the BLAS fast path.
    view = np.lib.stride_tricks.sliding_window_view(x, size, axis=1)
    b, t, e, s = view.shape
    return np.ascontiguousarray(view.transpose(0, 1, 3, 2)).reshape(b, t, s * e)


def pooled_features(model: ModelState, token_ids: np.ndarray) -> tuple[np.ndarray, dict]:
    """Deterministic part of the forward pass, up to (but excluding) dropout.

    Returns the concatenated max-pooled activations [batch, feature_dim]
    and the cache needed for backpropagation.
    """
    cfg = model.config
    token_ids = np.asarray(token_ids)
    if token_ids.ndim != 2:
        raise ValueError("token_ids must be [batch, seq_len]")
    if token_ids.min(initial=0) < 0 or token_ids.max(initial=0) >= model.vocab_size:
        raise ValueError("token id out of range")
    seq_len = token_ids.shape[1]
    if seq_len < max(cfg.kernel_sizes):
        raise ValueError("sequence shorter than the largest kernel")
    x = model.embedding.value[token_ids]  # [b, len, embed]
    lengths = (token_ids != cfg.pad_index).sum(axis=1)  # non-pad prefix length
    pooled_parts = []
    cache: dict = {"token_ids": token_ids, "x": x, "lengths": lengths, "per_kernel": {}}
    for s in cfg.kernel_sizes:
        t_out = seq_len - s + 1
        win = _windows(x, s)
        w_flat = model.conv_w[s].value.reshape(cfg.filters_per_kernel, -1)
        z = win @ w_flat.T + model.conv_b[s].value  # [b, t_out, filters]
        a = np.maximum(z, 0.0)
        # A window is pooled only when it starts on a real token.
        valid = np.arange(t_out)[None, :] < np.minimum(lengths, t_out)[:, None]
        neg = np.where(valid[:, :, None], a, -np.inf)
        argmax = neg.argmax(axis=1)  # [b, filters]
        pooled = np.take_along_axis(neg, argmax[:, None, :], axis=1)[:, 0, :]
        empty = lengths == 0  # no valid window: pool floor of zero
        pooled[empty] = 0.0
        pooled_parts.append(pooled.astype(x.dtype))
        cache["per_kernel"][s] = {"win": win, "z": z, "argmax": argmax, "empty": empty}
    h = np.concatenate(pooled_parts, axis=1)
    cache["h"] = h
    return h, cache


def apply_dropout(
    h: np.ndarray, p: float, mode: DropoutMode, rng: np.random.Generator | None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: kept activations are scaled by 1/(1-p) so the
    deterministic mode (identity) equals the stochastic expectation."""
    if mode == DropoutMode.DETERMINISTIC or p == 0.0:
        return h, None
    if rng is None:
        raise ValueError("stochastic dropout needs an rng")
    keep = rng.random(h.shape) >= p
    scale = (keep / (1.0 - p)).astype(h.dtype)
    return h * scale, scale


def output_head(model: ModelState, features: np.ndarray) -> np.ndarray:
    return features @ model.fc_w.value.T + model.fc_b.value


def forward(
    model: ModelState,
    token_ids: np.ndarray,
    mode: DropoutMode = DropoutMode.DETERMINISTIC,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, FeatureBatch]:
    """Run the network; returns logits and the post-dropout representations."""
    h, cache = pooled_features(model, token_ids)
    features, mask = apply_dropout(h, model.config.dropout_p, mode, rng)
    logits = output_head(model, features)
    cache["mask"] = mask
    cache["features"] = features
    model._cache = cache
    return logits, FeatureBatch(features, model.config.feature_dim)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient (softmax - onehot)/batch."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    p = softmax(logits)
    n = logits.shape[0]
    eps = np.finfo(logits.dtype).tiny
    loss = float(-np.log(np.maximum(p[np.arange(n), labels], eps)).mean())
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits.astype(logits.dtype)


def backward(
    model: ModelState,
    dlogits: np.ndarray,
    dfeatures_from_metric: np.ndarray | None = None,
) -> None:
    """Accumulate gradients of the combined loss into the parameters.

    dlogits is the cross-entropy path; dfeatures_from_metric (already
    carrying its internal weighting) is added to the representation
    gradient before the dropout mask is re-applied.
    """
    if model._cache is None:
        raise TrainingError("backward called without a stored forward pass")
    cache = model._cache
    cfg = model.config
    features = cache["features"]
    model.fc_w.grad += dlogits.T @ features
    model.fc_b.grad += dlogits.sum(axis=0)
    dfeat = dlogits @ model.fc_w.value
    if dfeatures_from_metric is not None:
        dfeat = dfeat + dfeatures_from_metric.astype(dfeat.dtype)
    mask = cache["mask"]
    dh = dfeat * mask if mask is not None else dfeat
    x = cache["x"]
    dx = np.zeros_like(x)
    offset = 0
    for s in cfg.kernel_sizes:
        k = cache["per_kernel"][s]
        dpool = dh[:, offset : offset + cfg.filters_per_kernel]
        offset += cfg.filters_per_kernel
        dpool = np.where(k["empty"][:, None], 0.0, dpool)
        z = k["z"]
        dz = np.zeros_like(z)
        np.put_along_axis(dz, k["argmax"][:, None, :], dpool[:, None, :], axis=1)
        dz *= z > 0.0  # ReLU mask; argmax positions are the only nonzeros
        w_flat = model.conv_w[s].value.reshape(cfg.filters_per_kernel, -1)
        bt = dz.shape[0] * dz.shape[1]
        dw_flat = dz.reshape(bt, -1).T @ k["win"].reshape(bt, -1)
        model.conv_w[s].grad += dw_flat.reshape(model.conv_w[s].value.shape)
        model.conv_b[s].grad += dz.sum(axis=(0, 1))
        dwin = dz @ w_flat  # [b, t_out, s*embed]
        t_out = z.shape[1]
        for i in range(s):
            dx[:, i : i + t_out, :] += dwin[:, :, i * cfg.embed_dim : (i + 1) * cfg.embed_dim]
    flat_ids = cache["token_ids"].ravel()
    np.add.at(model.embedding.grad, flat_ids, dx.reshape(-1, cfg.embed_dim))


def adam_step(params: list[Parameter], config) -> None:
    """One Adam update with bias correction; gradients are zeroed after use."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in parameter {p.name!r}")
        p.step_count += 1
        t = p.step_count
        p.m1 = config.beta1 * p.m1 + (1.0 - config.beta1) * p.grad
        p.m2 = config.beta2 * p.m2 + (1.0 - config.beta2) * (p.grad * p.grad)
        m_hat = p.m1 / (1.0 - config.beta1**t)
        v_hat = p.m2 / (1.0 - config.beta2**t)
        p.value -= (config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)).astype(
            p.value.dtype
        )
        p.grad[:] = 0.0

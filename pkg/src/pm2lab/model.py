"""MLP encoder with two sigmoid classifier heads and averaged inference.

The encoder maps feature vectors to embeddings through ReLU hidden layers
with a linear final layer. Each classifier head is its own small MLP
ending in a sigmoid, so head outputs are per-label probabilities in (0,1)
and the 0.5 decision threshold is well defined. Inference averages the
two heads and thresholds strictly above 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ShapeError, Tensor

CHECKPOINT_MAGIC = "pm2-checkpoint v1"


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int
    n_aus: int
    hidden_dims: tuple = (64, 64)
    embed_dim: int = 32
    classifier_hidden: tuple = (32,)

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(
            self, "classifier_hidden", tuple(int(d) for d in self.classifier_hidden)
        )
        dims = (self.feature_dim, self.embed_dim, self.n_aus,
                *self.hidden_dims, *self.classifier_hidden)
        if any(d < 1 for d in dims):
            raise ValueError(f"ModelConfig: all dimensions must be >= 1, got {self}")

    @property
    def encoder_dims(self):
        return (self.feature_dim, *self.hidden_dims, self.embed_dim)

    @property
    def classifier_dims(self):
        return (self.embed_dim, *self.classifier_hidden, self.n_aus)


@dataclass
class ModelParams:
    """Weight/bias tensors for the encoder and both classifier heads."""

    config: ModelConfig
    encoder: list = field(default_factory=list)
    classifier1: list = field(default_factory=list)
    classifier2: list = field(default_factory=list)

    GROUPS = ("encoder", "classifier1", "classifier2")

    def layers(self, group: str):
        if group not in self.GROUPS:
            raise ValueError(f"unknown parameter group {group!r}")
        return getattr(self, group)

    def named_parameters(self):
        """Yield (name, tensor) pairs in a fixed, reproducible order."""
        for group in self.GROUPS:
            for i, (w, b) in enumerate(self.layers(group)):
                yield f"{group}.{i}.W", w
                yield f"{group}.{i}.b", b

    def tensors(self):
        return [t for _, t in self.named_parameters()]

    def copy_arrays(self) -> dict:
        return {name: t.data.copy() for name, t in self.named_parameters()}


def _init_layers(rng: np.random.Generator, dims) -> list:
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = Tensor(rng.uniform(-s, s, size=(fan_in, fan_out)), requires_grad=True)
        b = Tensor(np.zeros(fan_out), requires_grad=True)
        layers.append((w, b))
    return layers


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    return ModelParams(
        config=config,
        encoder=_init_layers(rng, config.encoder_dims),
        classifier1=_init_layers(rng, config.classifier_dims),
        classifier2=_init_layers(rng, config.classifier_dims),
    )


def _as_batch(x) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.data.ndim != 2:
        raise ShapeError(f"expected a 2-d batch, got shape {t.data.shape}")
    return t


def _mlp_forward(layers, x: Tensor) -> Tensor:
    h = x
    for i, (w, b) in enumerate(layers):
        h = h.matmul(w).add(b)
        if i < len(layers) - 1:
            h = h.relu()
    return h


def encode(params: ModelParams, batch) -> Tensor:
    """Map a (b, feature_dim) batch to (b, embed_dim) embeddings."""
    x = _as_batch(batch)
    if x.data.shape[1] != params.config.feature_dim:
        raise ShapeError(
            f"encode: batch width {x.data.shape[1]} != "
            f"feature_dim {params.config.feature_dim}"
        )
    return _mlp_forward(params.encoder, x)


def classify(params: ModelParams, embeddings, head: int) -> Tensor:
    """Per-label probabilities in (0,1) from one classifier head."""
    if head not in (1, 2):
        raise ValueError(f"classify: head must be 1 or 2, got {head!r}")
    e = _as_batch(embeddings)
    if e.data.shape[1] != params.config.embed_dim:
        raise ShapeError(
            f"classify: embedding width {e.data.shape[1]} != "
            f"embed_dim {params.config.embed_dim}"
        )
    layers = params.classifier1 if head == 1 else params.classifier2
    return _mlp_forward(layers, e).sigmoid()


def predict(params: ModelParams, batch):
    """Average the two heads; a label is active iff the mean prob exceeds 0.5.

    Returns (probs, labels) as plain float64 / int arrays of shape (b, n_aus).
    """
    e = encode(params, batch)
    p1 = classify(params, e, 1).data
    p2 = classify(params, e, 2).data
    probs = (p1 + p2) / 2.0
    labels = (probs > 0.5).astype(np.int64)
    return probs, labels


# -- checkpoint serialization -------------------------------------------------
#
# Text format, bit-exact round trip:
#   pm2-checkpoint v1
#   feature_dim=<d> n_aus=<n> hidden_dims=<a,b> embed_dim=<e> classifier_hidden=<c>
#   tensor <name> <dim0> [<dim1>]
#   <one line of %.17g values per matrix row (vectors use a single line)>


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _dims_str(dims) -> str:
    return ",".join(str(d) for d in dims)


def _parse_dims(text: str):
    return tuple(int(p) for p in text.split(",") if p)


def save_checkpoint(params: ModelParams, path) -> None:
    cfg = params.config
    lines = [
        CHECKPOINT_MAGIC,
        f"feature_dim={cfg.feature_dim} n_aus={cfg.n_aus} "
        f"hidden_dims={_dims_str(cfg.hidden_dims)} embed_dim={cfg.embed_dim} "
        f"classifier_hidden={_dims_str(cfg.classifier_hidden)}",
    ]
    for name, t in params.named_parameters():
        a = t.data
        lines.append(f"tensor {name} {' '.join(str(d) for d in a.shape)}")
        rows = a if a.ndim == 2 else a[None, :]
        for row in rows:
            lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> ModelParams:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC!r} file")
    fields = dict(kv.split("=", 1) for kv in lines[1].split())
    config = ModelConfig(
        feature_dim=int(fields["feature_dim"]),
        n_aus=int(fields["n_aus"]),
        hidden_dims=_parse_dims(fields["hidden_dims"]),
        embed_dim=int(fields["embed_dim"]),
        classifier_hidden=_parse_dims(fields["classifier_hidden"]),
    )
    params = ModelParams(config=config)
    i = 2
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "tensor":
            raise ValueError(f"{path}: line {i + 1}: expected a tensor header")
        name, shape = head[1], tuple(int(d) for d in head[2:])
        n_rows = shape[0] if len(shape) == 2 else 1
        block = lines[i + 1 : i + 1 + n_rows]
        if len(block) != n_rows:
            raise ValueError(f"{path}: tensor {name}: truncated value block")
        data = np.array([[float(v) for v in row.split()] for row in block])
        if data.shape[1] != (shape[1] if len(shape) == 2 else shape[0]):
            raise ValueError(f"{path}: tensor {name}: row width does not match header")
        if len(shape) == 1:
            data = data[0]
        group, layer, kind = name.split(".")
        layers = params.layers(group)
        while len(layers) <= int(layer):
            layers.append([None, None])
        layers[int(layer)][0 if kind == "W" else 1] = Tensor(data, requires_grad=True)
        i += 1 + n_rows

    for group in ModelParams.GROUPS:
        dims = config.encoder_dims if group == "encoder" else config.classifier_dims
        layers = params.layers(group)
        if len(layers) != len(dims) - 1:
            raise ValueError(f"{path}: group {group}: wrong number of layers")
        for j, (w, b) in enumerate(layers):
            if w is None or b is None:
                raise ValueError(f"{path}: group {group} layer {j}: missing tensor")
            expect = (dims[j], dims[j + 1])
            if w.data.shape != expect or b.data.shape != (dims[j + 1],):
                raise ValueError(
                    f"{path}: group {group} layer {j}: shape mismatch "
                    f"(got {w.data.shape}/{b.data.shape}, expected {expect})"
                )
        params.layers(group)[:] = [tuple(pair) for pair in layers]
    return params

"""Transformer set encoder with statistical pooling and a classification head.

Data flow for one design matrix ``[s, d + 1]``::

    input projection  -> [s, e]
    L x encoder layer -> [s, e]     (self-attention + FFN, post-norm residuals)
    pool              -> [4e]       (column min | max | mean | std)
    head              -> [24]       (linear, ReLU, dropout, linear)

No positional encoding is added, so the encoder is permutation-equivariant
over rows and the pooled representation is permutation-invariant.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .rng import SplitRng
from .sampling import DesignMatrix

N_CLASSES = 24
POOL_STATS = ("min", "max", "mean", "std")
CHECKPOINT_MAGIC = b"TOPT1"


@dataclass(frozen=True)
class ModelConfig:
    d: int
    e: int = 30
    h: int = 1
    L: int = 1
    ffn_mult: int = 4
    dropout_p: float = 0.1
    head_hidden: int = 64
    n_classes: int = N_CLASSES

    def __post_init__(self):
        for name in ("d", "e", "h", "L", "ffn_mult", "head_hidden"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.e % self.h != 0:
            raise ConfigError(f"embedding size e={self.e} is not divisible by head count h={self.h}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.n_classes != N_CLASSES:
            raise ConfigError(f"n_classes is fixed at {N_CLASSES}, got {self.n_classes}")

    def parameter_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        d_in, e, ff = self.d + 1, self.e, self.ffn_mult * self.e
        shapes = [("input_proj.weight", (d_in, e)), ("input_proj.bias", (e,))]
        for i in range(self.L):
            p = f"layers.{i}."
            for proj in ("q", "k", "v", "o"):
                shapes += [(p + f"attn.{proj}.weight", (e, e)), (p + f"attn.{proj}.bias", (e,))]
            shapes += [(p + "norm1.gain", (e,)), (p + "norm1.bias", (e,))]
            shapes += [(p + "ffn.0.weight", (e, ff)), (p + "ffn.0.bias", (ff,))]
            shapes += [(p + "ffn.1.weight", (ff, e)), (p + "ffn.1.bias", (e,))]
            shapes += [(p + "norm2.gain", (e,)), (p + "norm2.bias", (e,))]
        shapes += [("head.0.weight", (4 * e, self.head_hidden)), ("head.0.bias", (self.head_hidden,))]
        shapes += [("head.1.weight", (self.head_hidden, self.n_classes)), ("head.1.bias", (self.n_classes,))]
        return shapes

    def parameter_count(self) -> int:
        return sum(math.prod(shape) for _, shape in self.parameter_shapes())


class TransOptModel:
    def __init__(self, config: ModelConfig, params: dict[str, T.Tensor]):
        self.config = config
        self.params = params
        self.training = False
        self.attention_maps: list[np.ndarray] | None = None

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "TransOptModel":
        """Glorot-uniform weights, zero biases, unit layer-norm gains."""
        rng = SplitRng(seed)
        params = {}
        for name, shape in config.parameter_shapes():
            if name.endswith(".weight"):
                limit = math.sqrt(6.0 / (shape[0] + shape[1]))
                data = rng.uniform(shape, -limit, limit)
            elif name.endswith(".gain"):
                data = np.ones(shape)
            else:
                data = np.zeros(shape)
            params[name] = T.Tensor(data, requires_grad=True)
        return cls(config, params)

    def train(self) -> "TransOptModel":
        self.training = True
        return self

    def eval(self) -> "TransOptModel":
        self.training = False
        return self

    def parameters(self) -> list[tuple[str, T.Tensor]]:
        return list(self.params.items())

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            if state[k].shape != p.shape:
                raise ShapeError(f"parameter {k}: expected {p.shape}, got {state[k].shape}")
            p.data = np.array(state[k], dtype=np.float64)

    # forward pass

    def _linear(self, x: T.Tensor, name: str) -> T.Tensor:
        return T.matmul(x, self.params[name + ".weight"]) + self.params[name + ".bias"]

    def _as_input(self, design) -> np.ndarray:
        x = design.as_input() if isinstance(design, DesignMatrix) else np.asarray(design, dtype=np.float64)
        if x.ndim < 2 or x.shape[-1] != self.config.d + 1:
            raise ShapeError(f"model expects inputs with {self.config.d + 1} columns, got shape {x.shape}")
        if x.shape[-2] < 1:
            raise ShapeError("design has no samples")
        return x

    def _attention(self, x: T.Tensor, prefix: str, rng) -> T.Tensor:
        h, e = self.config.h, self.config.e
        dh = e // h
        lead = x.shape[:-1]

        def heads(t):
            # [..., s, e] -> [..., h, s, dh]
            return T.swapaxes(T.reshape(t, lead + (h, dh)), -2, -3)

        q = heads(self._linear(x, prefix + "q"))
        k = heads(self._linear(x, prefix + "k"))
        v = heads(self._linear(x, prefix + "v"))
        scores = T.scale(T.matmul(q, T.swapaxes(k, -1, -2)), 1.0 / math.sqrt(dh))
        weights = T.softmax_rows(scores)
        if self.attention_maps is not None:
            self.attention_maps.append(weights.data)
        ctx = T.reshape(T.swapaxes(T.matmul(weights, v), -2, -3), lead + (e,))
        return self._linear(ctx, prefix + "o")

    def _encoder_layer(self, x: T.Tensor, i: int, rng) -> T.Tensor:
        p, P = f"layers.{i}.", self.params
        drop = self.config.dropout_p
        a = T.dropout(self._attention(x, p + "attn.", rng), drop, self.training, rng)
        x = T.layer_norm(x + a, P[p + "norm1.gain"], P[p + "norm1.bias"])
        f = T.dropout(T.relu(self._linear(x, p + "ffn.0")), drop, self.training, rng)
        f = self._linear(f, p + "ffn.1")
        return T.layer_norm(x + f, P[p + "norm2.gain"], P[p + "norm2.bias"])

    def encode(self, design, rng: SplitRng | None = None) -> T.Tensor:
        """Per-sample embeddings: ``[..., s, d + 1] -> [..., s, e]``."""
        x = self._linear(T.Tensor(self._as_input(design)), "input_proj")
        for i in range(self.config.L):
            x = self._encoder_layer(x, i, rng)
        return x

    def classify(self, design, rng: SplitRng | None = None) -> T.Tensor:
        """Raw class logits; a stacked ``[b, s, d + 1]`` input gives ``[b, 24]``."""
        x = self._as_input(design)
        single = x.ndim == 2
        first_map = len(self.attention_maps) if self.attention_maps is not None else 0
        z = pool(self.encode(x[None] if single else x, rng))
        if single and self.attention_maps is not None:
            self.attention_maps[first_map:] = [w[0] for w in self.attention_maps[first_map:]]
        hidden = T.relu(self._linear(z, "head.0"))
        hidden = T.dropout(hidden, self.config.dropout_p, self.training, rng)
        logits = self._linear(hidden, "head.1")
        return T.reshape(logits, (self.config.n_classes,)) if single else logits

    __call__ = classify

    # persistence

    def save(self, path) -> None:
        Path(path).write_bytes(dumps_checkpoint(self))

    @classmethod
    def load(cls, path) -> "TransOptModel":
        return loads_checkpoint(Path(path).read_bytes())


def pool(encoded: T.Tensor) -> T.Tensor:
    """Concatenate column min, max, mean and std over the sample axis."""
    if encoded.ndim < 2 or encoded.shape[-2] == 0:
        raise ShapeError(f"pool needs at least one sample row, got shape {encoded.shape}")
    return T.concat([T.reduce(encoded, stat, axis=-2) for stat in POOL_STATS], axis=-1)


def init(config: ModelConfig, seed: int) -> TransOptModel:
    return TransOptModel.init(config, seed)


# Checkpoint layout (all integers little-endian):
#   b"TOPT1"
#   u32 config length, config as UTF-8 JSON (sorted keys)
#   u32 parameter count
#   per parameter: u16 name length, name bytes, u8 ndim, ndim x u32 extents,
#                  float64 values in row-major order


def dumps_checkpoint(model: TransOptModel) -> bytes:
    cfg = json.dumps(asdict(model.config), sort_keys=True).encode()
    out = [CHECKPOINT_MAGIC, struct.pack("<I", len(cfg)), cfg, struct.pack("<I", len(model.params))]
    for name, p in model.params.items():
        raw = name.encode()
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack(f"<B{p.ndim}I", p.ndim, *p.shape))
        out.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return b"".join(out)


def loads_checkpoint(blob: bytes) -> TransOptModel:
    if blob[:5] != CHECKPOINT_MAGIC:
        raise ValueError("not a TOPT1 checkpoint")
    pos = 5

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, blob, pos)
        pos += struct.calcsize(fmt)
        return vals

    (n,) = take("<I")
    config = ModelConfig(**json.loads(blob[pos : pos + n]))
    pos += n
    (count,) = take("<I")
    params = {}
    for _ in range(count):
        (n,) = take("<H")
        name = blob[pos : pos + n].decode()
        pos += n
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I")
        size = math.prod(shape)
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape)
        pos += 8 * size
        params[name] = T.Tensor(data.astype(np.float64), requires_grad=True)
    expected = [name for name, _ in config.parameter_shapes()]
    if list(params) != expected:
        raise ValueError("checkpoint parameters do not match its config")
    return TransOptModel(config, params)

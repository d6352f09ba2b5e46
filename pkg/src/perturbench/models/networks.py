"""The bundled desk-scale classifiers.

All three models implement the same contract: deterministic `forward`,
`input_gradient` (full backward pass to the image), and named activation
taps used by the visualization tools. Weights are float64 in memory and are
initialized from an explicit seed, so identically-configured models are
bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor, concat, conv2d, tensor
from ..rng import Rng
from .functional import attention_with_probs, cross_entropy, layer_norm

#: tap names every model exposes (attn_probs is ViT-only)
TAP_FIRST = "first_block"
TAP_LAST = "last_block"
TAP_ATTN = "attn_probs"


@dataclass(frozen=True)
class TinyCnnConfig:
    image_size: int = 32
    in_channels: int = 3
    channels: tuple = (16, 32, 64)
    kernel: int = 3
    num_classes: int = 10

    def to_dict(self):
        return {"image_size": self.image_size, "in_channels": self.in_channels,
                "channels": list(self.channels), "kernel": self.kernel,
                "num_classes": self.num_classes}

    @staticmethod
    def from_dict(d):
        return TinyCnnConfig(image_size=d["image_size"], in_channels=d["in_channels"],
                             channels=tuple(d["channels"]), kernel=d["kernel"],
                             num_classes=d["num_classes"])


@dataclass(frozen=True)
class TinyViTConfig:
    image_size: int = 32
    in_channels: int = 3
    patch_size: int = 4
    embed_dim: int = 64
    heads: int = 2
    blocks: int = 2
    mlp_dim: int = 128
    num_classes: int = 10

    def __post_init__(self):
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.image_size % self.patch_size != 0:
            raise ValueError("image_size must be divisible by patch_size")

    def to_dict(self):
        return {"image_size": self.image_size, "in_channels": self.in_channels,
                "patch_size": self.patch_size, "embed_dim": self.embed_dim,
                "heads": self.heads, "blocks": self.blocks, "mlp_dim": self.mlp_dim,
                "num_classes": self.num_classes}

    @staticmethod
    def from_dict(d):
        return TinyViTConfig(**d)


@dataclass(frozen=True)
class LinearSoftmaxConfig:
    input_shape: tuple = (32, 32, 3)
    num_classes: int = 10

    def to_dict(self):
        return {"input_shape": list(self.input_shape), "num_classes": self.num_classes}

    @staticmethod
    def from_dict(d):
        return LinearSoftmaxConfig(input_shape=tuple(d["input_shape"]),
                                   num_classes=d["num_classes"])


def _uniform_fan_in(rng: Rng, shape, fan_in: int) -> np.ndarray:
    # He-style scaled uniform: variance 2/fan_in, suited to GELU stacks
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _center(x: Tensor) -> Tensor:
    # fixed input scaling [0,1] -> [-1,1]; part of the model, not preprocessing
    return (x - 0.5) * 2.0


class Classifier:
    """Common forward / gradient / tap plumbing."""

    kind = "base"

    def __init__(self):
        self.params: dict[str, Tensor] = {}

    # subclasses implement the graph
    def forward_graph(self, x: Tensor):
        """Return (logits Tensor, taps dict). x is (N, H, W, C)."""
        raise NotImplementedError

    @property
    def input_shape(self):
        raise NotImplementedError

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.shape[1:] != tuple(self.input_shape):
            raise ValueError(f"expected input {self.input_shape}, got {x.shape[1:]}")
        return x if not single else x

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        if xs.shape[1:] != tuple(self.input_shape):
            raise ValueError(f"expected input {self.input_shape}, got {xs.shape[1:]}")
        logits, _ = self.forward_graph(tensor(xs))
        return logits.data

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != tuple(self.input_shape):
            raise ValueError(f"expected input {self.input_shape}, got {x.shape}")
        return self.forward_batch(x[None])[0]

    def predict(self, x: np.ndarray) -> int:
        return int(np.argmax(self.forward(x)))

    def predict_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward_batch(xs), axis=1)

    def input_gradient(self, x: np.ndarray, y: int, loss: str = "ce") -> np.ndarray:
        """d loss(forward(x), y) / dx through the whole network."""
        if loss != "ce":
            raise ValueError(f"unknown loss tag {loss!r}")
        y = int(y)
        if not 0 <= y < self.num_classes:
            raise ValueError(f"label {y} outside [0, {self.num_classes})")
        x = np.asarray(x, dtype=np.float64)
        xt = tensor(x[None], requires_grad=True)
        logits, _ = self.forward_graph(xt)
        cross_entropy(logits, np.array([y])).backward()
        return xt.grad[0]

    def logit_gradient(self, x: np.ndarray, class_id: int) -> np.ndarray:
        """d logits[class_id] / dx (used for saliency computations)."""
        xt = tensor(np.asarray(x, dtype=np.float64)[None], requires_grad=True)
        logits, _ = self.forward_graph(xt)
        logits[0, int(class_id)].backward()
        return xt.grad[0]

    def taps_for_class(self, x: np.ndarray, class_id: int):
        """Forward + backward from one class logit; returns taps with values
        and gradients, for Grad-CAM style analyses."""
        xt = tensor(np.asarray(x, dtype=np.float64)[None], requires_grad=True)
        logits, taps = self.forward_graph(xt)
        logits[0, int(class_id)].backward()
        return logits.data[0], taps

    # -- parameter plumbing

    def param_items(self):
        return sorted(self.params.items())

    def set_param_arrays(self, arrays: dict[str, np.ndarray]):
        for name, arr in arrays.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name}")
            if self.params[name].data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}")
            self.params[name].data = np.asarray(arr, dtype=np.float64)

    def zero_params(self):
        for t in self.params.values():
            t.data = np.zeros_like(t.data)


class LinearSoftmax(Classifier):
    """Flatten + single linear layer. The analytic-gradient oracle model:
    d CE / dx = ((softmax(Wx + b) - onehot(y))^T W) reshaped to the image."""

    kind = "linear_softmax"

    def __init__(self, config: LinearSoftmaxConfig = LinearSoftmaxConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        rng = Rng(seed, stream=101)
        d = int(np.prod(config.input_shape))
        self.params = {
            "w": tensor(_uniform_fan_in(rng, (d, config.num_classes), d), requires_grad=True),
            "b": tensor(np.zeros(config.num_classes), requires_grad=True),
        }

    @property
    def input_shape(self):
        return tuple(self.config.input_shape)

    @property
    def num_classes(self):
        return self.config.num_classes

    def forward_graph(self, x: Tensor):
        n = x.shape[0]
        flat = x.reshape(n, int(np.prod(self.input_shape)))
        logits = flat @ self.params["w"] + self.params["b"]
        return logits, {}


class TinyCnn(Classifier):
    """Three stride-2 convolution stages (16/32/64 channels, 3x3 kernels)
    with GELU, global average pooling and a linear head.

    GELU rather than ReLU keeps the model smooth, so central-difference
    gradient checks converge cleanly.
    """

    kind = "tiny_cnn"

    def __init__(self, config: TinyCnnConfig = TinyCnnConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        rng = Rng(seed, stream=102)
        k = config.kernel
        params = {}
        cin = config.in_channels
        for i, cout in enumerate(config.channels):
            fan_in = k * k * cin
            params[f"conv{i}_w"] = tensor(
                _uniform_fan_in(rng, (k, k, cin, cout), fan_in), requires_grad=True)
            params[f"conv{i}_b"] = tensor(np.zeros(cout), requires_grad=True)
            cin = cout
        params["head_w"] = tensor(
            _uniform_fan_in(rng, (cin, config.num_classes), cin), requires_grad=True)
        params["head_b"] = tensor(np.zeros(config.num_classes), requires_grad=True)
        self.params = params

    @property
    def input_shape(self):
        c = self.config
        return (c.image_size, c.image_size, c.in_channels)

    @property
    def num_classes(self):
        return self.config.num_classes

    def forward_graph(self, x: Tensor):
        taps = {}
        h = _center(x)
        pad = self.config.kernel // 2
        for i in range(len(self.config.channels)):
            h = conv2d(h, self.params[f"conv{i}_w"], self.params[f"conv{i}_b"],
                       stride=2, pad=pad).gelu()
            if i == 0:
                taps[TAP_FIRST] = h
        taps[TAP_LAST] = h
        pooled = h.mean(axis=(1, 2))
        logits = pooled @ self.params["head_w"] + self.params["head_b"]
        return logits, taps


class TinyViT(Classifier):
    """Two-block pre-norm vision transformer on 4x4 patches.

    Patch embeddings get learned positional embeddings and a prepended [CLS]
    token; each block is LN -> multi-head self-attention -> residual, then
    LN -> GELU MLP -> residual; classification reads the [CLS] token through
    a linear head after a final LN.
    """

    kind = "tiny_vit"

    def __init__(self, config: TinyViTConfig = TinyViTConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        rng = Rng(seed, stream=103)
        c = config
        d = c.embed_dim
        patch_dim = c.patch_size * c.patch_size * c.in_channels
        n_tokens = (c.image_size // c.patch_size) ** 2 + 1
        params = {
            "patch_w": tensor(_uniform_fan_in(rng, (patch_dim, d), patch_dim), requires_grad=True),
            "patch_b": tensor(np.zeros(d), requires_grad=True),
            "cls": tensor(np.zeros((1, 1, d)), requires_grad=True),
            "pos": tensor(rng.uniform(-0.02, 0.02, size=(n_tokens, d)), requires_grad=True),
        }
        for i in range(c.blocks):
            for nm in ("q", "k", "v"):
                params[f"blk{i}_w{nm}"] = tensor(_uniform_fan_in(rng, (d, d), d), requires_grad=True)
                params[f"blk{i}_b{nm}"] = tensor(np.zeros(d), requires_grad=True)
            params[f"blk{i}_wo"] = tensor(_uniform_fan_in(rng, (d, d), d), requires_grad=True)
            params[f"blk{i}_bo"] = tensor(np.zeros(d), requires_grad=True)
            params[f"blk{i}_ln1_g"] = tensor(np.ones(d), requires_grad=True)
            params[f"blk{i}_ln1_b"] = tensor(np.zeros(d), requires_grad=True)
            params[f"blk{i}_ln2_g"] = tensor(np.ones(d), requires_grad=True)
            params[f"blk{i}_ln2_b"] = tensor(np.zeros(d), requires_grad=True)
            params[f"blk{i}_mlp1_w"] = tensor(_uniform_fan_in(rng, (d, c.mlp_dim), d), requires_grad=True)
            params[f"blk{i}_mlp1_b"] = tensor(np.zeros(c.mlp_dim), requires_grad=True)
            params[f"blk{i}_mlp2_w"] = tensor(
                _uniform_fan_in(rng, (c.mlp_dim, d), c.mlp_dim), requires_grad=True)
            params[f"blk{i}_mlp2_b"] = tensor(np.zeros(d), requires_grad=True)
        params["final_ln_g"] = tensor(np.ones(d), requires_grad=True)
        params["final_ln_b"] = tensor(np.zeros(d), requires_grad=True)
        params["head_w"] = tensor(_uniform_fan_in(rng, (d, c.num_classes), d), requires_grad=True)
        params["head_b"] = tensor(np.zeros(c.num_classes), requires_grad=True)
        self.params = params

    @property
    def input_shape(self):
        c = self.config
        return (c.image_size, c.image_size, c.in_channels)

    @property
    def num_classes(self):
        return self.config.num_classes

    @property
    def patch_grid(self):
        g = self.config.image_size // self.config.patch_size
        return (g, g)

    def _patchify(self, x: Tensor) -> Tensor:
        c = self.config
        n = x.shape[0]
        g = c.image_size // c.patch_size
        p = c.patch_size
        t = x.reshape(n, g, p, g, p, c.in_channels)
        t = t.transpose((0, 1, 3, 2, 4, 5))
        return t.reshape(n, g * g, p * p * c.in_channels)

    def _mhsa(self, x: Tensor, i: int):
        c = self.config
        n, tkn, d = x.shape
        h, dh = c.heads, c.embed_dim // c.heads
        q = x @ self.params[f"blk{i}_wq"] + self.params[f"blk{i}_bq"]
        k = x @ self.params[f"blk{i}_wk"] + self.params[f"blk{i}_bk"]
        v = x @ self.params[f"blk{i}_wv"] + self.params[f"blk{i}_bv"]
        def split(t):
            return t.reshape(n, tkn, h, dh).transpose((0, 2, 1, 3))
        out, probs = attention_with_probs(split(q), split(k), split(v))
        out = out.transpose((0, 2, 1, 3)).reshape(n, tkn, d)
        return out @ self.params[f"blk{i}_wo"] + self.params[f"blk{i}_bo"], probs

    def forward_graph(self, x: Tensor):
        c = self.config
        n = x.shape[0]
        taps = {TAP_ATTN: []}
        tok = self._patchify(_center(x)) @ self.params["patch_w"] + self.params["patch_b"]
        cls = self.params["cls"] * tensor(np.ones((n, 1, 1)))
        seq = concat([cls, tok], axis=1) + self.params["pos"]
        for i in range(c.blocks):
            normed = layer_norm(seq, self.params[f"blk{i}_ln1_g"], self.params[f"blk{i}_ln1_b"])
            attn_out, probs = self._mhsa(normed, i)
            taps[TAP_ATTN].append(probs)
            seq = seq + attn_out
            normed = layer_norm(seq, self.params[f"blk{i}_ln2_g"], self.params[f"blk{i}_ln2_b"])
            mlp = (normed @ self.params[f"blk{i}_mlp1_w"] + self.params[f"blk{i}_mlp1_b"]).gelu()
            mlp = mlp @ self.params[f"blk{i}_mlp2_w"] + self.params[f"blk{i}_mlp2_b"]
            seq = seq + mlp
            if i == 0:
                taps[TAP_FIRST] = seq
        final = layer_norm(seq, self.params["final_ln_g"], self.params["final_ln_b"])
        taps[TAP_LAST] = final
        logits = final[:, 0, :] @ self.params["head_w"] + self.params["head_b"]
        return logits, taps


MODEL_KINDS = {
    LinearSoftmax.kind: (LinearSoftmax, LinearSoftmaxConfig),
    TinyCnn.kind: (TinyCnn, TinyCnnConfig),
    TinyViT.kind: (TinyViT, TinyViTConfig),
}


def build_model(kind: str, seed: int = 0, config=None) -> Classifier:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}")
    cls, cfg_cls = MODEL_KINDS[kind]
    return cls(config if config is not None else cfg_cls(), seed=seed)

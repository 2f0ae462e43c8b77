"""Minimal dense-network toolkit: manual forward/backward, inverted dropout, Adam.

Everything is plain numpy. Networks are small stacks of fully connected
layers; parameters live in ordinary arrays so they can be shared with the
Adam optimizer through name -> array dicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class DenseNet:
    layers: list[DenseLayer]
    dropout_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weights.shape[1] != nxt.weights.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def param_dict(self, prefix: str) -> dict[str, np.ndarray]:
        """Live views of the parameter arrays, keyed `prefix.W0`, `prefix.b0`, ..."""
        out = {}
        for idx, layer in enumerate(self.layers):
            out[f"{prefix}.W{idx}"] = layer.weights
            out[f"{prefix}.b{idx}"] = layer.bias
        return out


def init_dense(sizes: list[int], activations: list[str], dropout_rate: float,
               rng: np.random.Generator) -> DenseNet:
    """Build a net with Glorot-uniform weights (seeded) and zero biases.

    `sizes` lists the layer widths input-first, so a net with one hidden
    layer is `[n_in, n_hidden, n_out]` with two activations.
    """
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per weight layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return DenseNet(layers, dropout_rate)


def _activate(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre))
    return pre


def _activation_grad(pre: np.ndarray, post: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (pre > 0.0).astype(pre.dtype)
    if kind == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(pre)


def forward(net: DenseNet, x: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None):
    """Run the net on `x` (a vector or a batch of row vectors).

    In train mode, inverted dropout (mask scaled by 1/(1-rate)) is applied to
    every activation except the output layer's; eval mode applies none. The
    returned cache holds everything `backward` needs.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input width {x.shape[-1]} != expected {net.input_dim}")
    if train and net.dropout_rate > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")

    cache = []
    out = x
    last = len(net.layers) - 1
    for idx, layer in enumerate(net.layers):
        pre = out @ layer.weights + layer.bias
        post = _activate(pre, layer.activation)
        mask = None
        if train and net.dropout_rate > 0.0 and idx != last:
            keep = 1.0 - net.dropout_rate
            mask = (rng.random(post.shape) < keep) / keep
            post = post * mask
        cache.append((out, pre, mask))
        out = post
    return out, cache


def backward(net: DenseNet, cache, d_out: np.ndarray):
    """Backpropagate `d_out` through a cached forward pass.

    Returns (`grads`, `d_input`) where `grads` is a list of (dW, db) aligned
    with `net.layers`.
    """
    if len(cache) != len(net.layers):
        raise ValueError("cache does not match net depth")
    d_out = np.asarray(d_out, dtype=float)
    if d_out.shape[-1] != net.output_dim:
        raise ValueError(f"gradient width {d_out.shape[-1]} != output {net.output_dim}")

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    d_post = d_out
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        x_in, pre, mask = cache[idx]
        if x_in.shape[-1] != layer.weights.shape[0]:
            raise ValueError("stale cache: shapes do not match net")
        if mask is not None:
            d_post = d_post * mask
        post = _activate(pre, layer.activation)
        d_pre = d_post * _activation_grad(pre, post, layer.activation)
        if d_pre.ndim == 1:
            dw = np.outer(x_in, d_pre)
            db = d_pre.copy()
        else:
            dw = x_in.T @ d_pre
            db = d_pre.sum(axis=0)
        grads[idx] = (dw, db)
        d_post = d_pre @ layer.weights.T
    return grads, d_post


def dense_grads_to_dict(net: DenseNet, grads, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for idx, (dw, db) in enumerate(grads):
        out[f"{prefix}.W{idx}"] = dw
        out[f"{prefix}.b{idx}"] = db
    return out


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(params: dict[str, np.ndarray], lr: float = 0.001, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, value in params.items():
        state.m[name] = np.zeros_like(value)
        state.v[name] = np.zeros_like(value)
    return state


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place on `params`.

    `grads` may cover a subset of the parameters; missing entries are treated
    as zero gradient (their moments still decay toward zero only when
    touched, so never-touched parameters stay exactly at initialization).
    """
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if grad.shape != params[name].shape:
            raise ValueError(f"gradient shape {grad.shape} != parameter "
                             f"shape {params[name].shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def grad_check(loss_fn, params: dict[str, np.ndarray], h: float = 1e-5,
               max_coords: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Max relative disagreement between analytic and central-difference grads.

    `loss_fn(params) -> (loss, grads)` must be evaluable at perturbed params;
    only the loss value is used for the numeric side. With `max_coords`, a
    seeded random subset of coordinates is checked instead of all of them.
    """
    if h <= 0.0:
        raise ValueError("degenerate step h")
    _, analytic = loss_fn(params)
    coords = []
    for name in sorted(params):
        for flat_idx in range(params[name].size):
            coords.append((name, flat_idx))
    if max_coords is not None and max_coords < len(coords):
        if rng is None:
            rng = np.random.default_rng(0)
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(picks)]

    worst = 0.0
    for name, flat_idx in coords:
        flat = params[name].reshape(-1)
        saved = flat[flat_idx]
        flat[flat_idx] = saved + h
        up, _ = loss_fn(params)
        flat[flat_idx] = saved - h
        down, _ = loss_fn(params)
        flat[flat_idx] = saved
        numeric = (up - down) / (2.0 * h)
        a = float(analytic[name].reshape(-1)[flat_idx])
        err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst

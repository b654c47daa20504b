"""Dense feed-forward networks with hand-written reverse-mode gradients.

Everything is float64 numpy. Inputs may be a single vector ``(n_in,)`` or a
batch ``(batch, n_in)``; outputs follow the same convention.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "identity")


class ShapeError(ValueError):
    pass


@dataclass
class Layer:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"bad layer shapes {self.weight.shape} / {self.bias.shape}")


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[0] != nxt.weight.shape[1]:
                raise ShapeError("consecutive layer dimensions do not chain")

    @property
    def n_in(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [layer.weight.shape[0] for layer in self.layers]

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in self.arrays():
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def __call__(self, x):
        return mlp_forward(self, x)[0]


@dataclass
class ForwardTrace:
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer
    outputs: list[np.ndarray] = field(default_factory=list)  # post-activation of each layer
    squeeze: bool = False


def init_mlp(sizes, rng: np.random.Generator, activations=None, final_activation="identity",
             final_scale: float | None = None) -> MlpParams:
    """Uniform fan-in initialisation ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``.

    ``final_scale`` overrides the bound of the last layer (small output init).
    """
    n_layers = len(sizes) - 1
    if activations is None:
        activations = ["tanh"] * (n_layers - 1) + [final_activation]
    layers = []
    for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(n_in)
        if k == n_layers - 1 and final_scale is not None:
            bound = final_scale
        w = rng.uniform(-bound, bound, size=(n_out, n_in))
        b = rng.uniform(-bound, bound, size=n_out)
        layers.append(Layer(w, b, activations[k]))
    return MlpParams(layers)


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardTrace]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[-1] != params.n_in:
        raise ShapeError(f"input has {h.shape[-1]} features, network expects {params.n_in}")
    trace = ForwardTrace(squeeze=squeeze)
    for layer in params.layers:
        trace.inputs.append(h)
        pre = h @ layer.weight.T + layer.bias
        h = np.tanh(pre) if layer.activation == "tanh" else pre
        trace.outputs.append(h)
    return (h[0] if squeeze else h), trace


def mlp_backward(params: MlpParams, trace: ForwardTrace, output_grad, param_grads: bool = True):
    """Return ``(param_grads, input_grad)``; param grads ordered like ``params.arrays()``.

    Batched traces sum parameter gradients over the batch. With
    ``param_grads=False`` only the input gradient is computed (first item is None).
    """
    if len(trace.inputs) != len(params.layers):
        raise ShapeError("trace does not match network depth")
    g = np.asarray(output_grad, dtype=np.float64)
    if trace.squeeze:
        g = g[None, :]
    if g.shape != trace.outputs[-1].shape:
        raise ShapeError(f"output grad shape {g.shape} != {trace.outputs[-1].shape}")
    grads = [None] * (2 * len(params.layers)) if param_grads else None
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if layer.activation == "tanh":
            out = trace.outputs[k]
            g = g * (1.0 - out * out)
        if param_grads:
            grads[2 * k] = g.T @ trace.inputs[k]
            grads[2 * k + 1] = g.sum(axis=0)
        g = g @ layer.weight
    return grads, (g[0] if trace.squeeze else g)


def zeros_like_params(params: MlpParams) -> list[np.ndarray]:
    return [np.zeros_like(a) for a in params.arrays()]


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


def adam_step(params: MlpParams, grads, state: AdamState) -> MlpParams:
    """In-place Adam update of ``params`` (returned for convenience)."""
    arrays = params.arrays()
    if len(grads) != len(arrays):
        raise ShapeError("gradient list does not match parameters")
    if state.m is None:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Polyak averaging ``target <- tau * online + (1 - tau) * target`` in place."""
    t_arrays, o_arrays = target.arrays(), online.arrays()
    if [a.shape for a in t_arrays] != [a.shape for a in o_arrays]:
        raise ShapeError("target and online networks differ in shape")
    for t, o in zip(t_arrays, o_arrays):
        t *= 1.0 - tau
        t += tau * o
    return target


def exponential_decay(lr0: float, final_fraction: float, total_steps: int):
    """Learning-rate schedule decaying geometrically to ``lr0 * final_fraction``."""
    def schedule(step: int) -> float:
        frac = min(max(step / max(total_steps, 1), 0.0), 1.0)
        return lr0 * final_fraction**frac
    return schedule

"""Dense ReLU layers: forward/backward passes, weight penalties, Nesterov SGD."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LayerParams:
    """One dense layer y = relu(W x + b), W of shape (out_dim, in_dim)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be 2-D (out_dim, in_dim)")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bias length must equal the weight row count")

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @property
    def in_dim(self):
        return self.weights.shape[1]

    def copy(self):
        return LayerParams(self.weights.copy(), self.bias.copy())


def relu(x):
    """Elementwise max(x, 0); the subgradient used at 0 is 0."""
    return np.maximum(x, 0.0)


def forward(layers, x):
    """Run x through the layer stack.

    Returns the activation list with the input at position 0 and the output
    of layer k at position k; x may be one vector or a (batch, in_dim) matrix.
    """
    acts = [np.asarray(x, dtype=np.float64)]
    for layer in layers:
        if acts[-1].shape[-1] != layer.in_dim:
            raise ValueError(
                f"input width {acts[-1].shape[-1]} does not match layer in_dim {layer.in_dim}"
            )
        acts.append(relu(acts[-1] @ layer.weights.T + layer.bias))
    return acts


def backward(layers, activations, grad_out):
    """Backpropagate grad_out (d loss / d final activation) through the stack.

    ``activations`` must come from a matching :func:`forward` call.  Returns
    ``(grads, grad_input)`` where grads is a list of (dW, db) per layer.
    ReLU masking uses activation > 0, which matches a zero subgradient at
    exactly 0.
    """
    if len(activations) != len(layers) + 1:
        raise ValueError("activation list does not match the layer stack")
    g = np.asarray(grad_out, dtype=np.float64) * (activations[-1] > 0)
    grads = [None] * len(layers)
    for k in range(len(layers), 0, -1):
        a_prev = activations[k - 1]
        if g.ndim == 2:
            gw = g.T @ a_prev
            gb = g.sum(axis=0)
        else:
            gw = np.outer(g, a_prev)
            gb = g.copy()
        grads[k - 1] = (gw, gb)
        g = g @ layers[k - 1].weights
        if k - 1 > 0:
            g = g * (activations[k - 1] > 0)
    return grads, g


def regularizer_value_and_grads(layers, nu1, nu2):
    """L1 plus squared-L2 penalty over weight matrices only (biases excluded).

    Returns ``(nu1 * sum|W| + nu2 * sum W^2, grads)`` with per-layer gradients
    ``nu1 * sign(W) + 2 * nu2 * W`` and zero bias gradients; sign(0) is 0.
    """
    if nu1 < 0 or nu2 < 0:
        raise ValueError("penalty coefficients must be non-negative")
    value = 0.0
    grads = []
    for layer in layers:
        w = layer.weights
        value += nu1 * float(np.abs(w).sum()) + nu2 * float((w * w).sum())
        grads.append((nu1 * np.sign(w) + 2.0 * nu2 * w, np.zeros_like(layer.bias)))
    return value, grads


@dataclass
class OptimizerState:
    """Velocity buffers plus the step-decayed learning-rate schedule."""

    velocities: list
    base_lr: float
    momentum: float = 0.99
    decay: float = 0.0
    step_count: int = 0

    @classmethod
    def for_params(cls, params, base_lr, momentum=0.99, decay=0.0):
        if base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not (0.0 <= momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if decay < 0:
            raise ValueError("decay must be non-negative")
        return cls([np.zeros_like(p) for p in params], base_lr, momentum, decay)

    def learning_rate(self):
        return self.base_lr / (1.0 + self.decay * self.step_count)


def nesterov_step(params, grads, state):
    """One Nesterov-momentum update, applied to every array in place.

    v <- mu*v - lr_t*g and p <- p + mu*v - lr_t*g with
    lr_t = base_lr / (1 + decay*step_count); momentum 0 reduces to plain SGD.
    """
    if len(params) != len(grads) or len(params) != len(state.velocities):
        raise ValueError("params, grads and velocities must align")
    lr = state.learning_rate()
    mu = state.momentum
    for p, g, v in zip(params, grads, state.velocities):
        if p.shape != g.shape:
            raise ValueError("gradient shape does not match its parameter")
        v *= mu
        v -= lr * g
        p += mu * v
        p -= lr * g
    state.step_count += 1
    return params, state

"""Small two-layer perceptrons with explicit reverse-mode gradients and Adam.

An :class:`Mlp` holds a *bank* of ``n`` independent networks with equal
shapes so that all per-(agent, lag) motion networks run in one batched
call.  Inputs are ``(n, batch, in_dim)``; outputs ``(n, batch, out_dim)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import Rng

HIDDEN = 50
LEARNING_RATE = 1e-4
DECAY = 0.995

# Hidden-layer nonlinearity; the smooth tanh keeps finite-difference checks exact.
ACTIVATION = "tanh"

PARAM_NAMES = ("w1", "b1", "w2", "b2")


class DimensionError(ValueError):
    pass


class OptimizationError(FloatingPointError):
    pass


def _act(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(a)
    if kind == "identity":
        return a
    raise ValueError(f"unknown activation {kind!r}")


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    # derivative expressed through the activated value z
    if kind == "tanh":
        return 1.0 - z * z
    return np.ones_like(z)


@dataclass
class Mlp:
    w1: np.ndarray  # (n, hidden, in)
    b1: np.ndarray  # (n, hidden)
    w2: np.ndarray  # (n, out, hidden)
    b2: np.ndarray  # (n, out)
    activation: str = ACTIVATION

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: Rng, hidden: int = HIDDEN, n: int = 1,
             out_scale: float = 1.0, activation: str = ACTIVATION) -> "Mlp":
        """Uniform ``+-1/sqrt(fan_in)`` initialisation per layer.

        ``out_scale`` shrinks the second layer; 0 starts every output at zero.
        """
        g = rng.generator
        lim1 = 1.0 / np.sqrt(in_dim)
        lim2 = out_scale / np.sqrt(hidden)
        return cls(
            w1=g.uniform(-lim1, lim1, (n, hidden, in_dim)),
            b1=g.uniform(-lim1, lim1, (n, hidden)),
            w2=g.uniform(-lim2, lim2, (n, out_dim, hidden)),
            b2=g.uniform(-lim2, lim2, (n, out_dim)),
            activation=activation,
        )

    @property
    def n(self) -> int:
        return self.w1.shape[0]

    @property
    def in_dim(self) -> int:
        return self.w1.shape[2]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Return outputs and the cache needed by :meth:`backward`."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, None, :]
        if x.ndim != 3 or x.shape[0] != self.n or x.shape[2] != self.in_dim:
            raise DimensionError(
                f"expected input (n={self.n}, batch, {self.in_dim}), got {x.shape}")
        z = _act(x @ self.w1.transpose(0, 2, 1) + self.b1[:, None, :], self.activation)
        y = z @ self.w2.transpose(0, 2, 1) + self.b2[:, None, :]
        return (y[0, 0] if single else y), (x, z, single)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: tuple, grad_out: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Gradients of ``sum(grad_out * y)`` w.r.t. parameters and input."""
        x, z, single = cache
        g = np.asarray(grad_out, dtype=float)
        if single:
            g = g[None, None, :]
        grads = {
            "w2": g.transpose(0, 2, 1) @ z,
            "b2": g.sum(axis=1),
        }
        dz = (g @ self.w2) * _act_grad(z, self.activation)
        grads["w1"] = dz.transpose(0, 2, 1) @ x
        grads["b1"] = dz.sum(axis=1)
        dx = dz @ self.w1
        return grads, (dx[0, 0] if single else dx)

    def to_json(self) -> str:
        """Flat parameter list with a shape header."""
        return json.dumps({
            "activation": self.activation,
            "shapes": {k: list(v.shape) for k, v in self.params().items()},
            "values": {k: v.ravel().tolist() for k, v in self.params().items()},
        })

    @classmethod
    def from_json(cls, text: str) -> "Mlp":
        doc = json.loads(text)
        arrs = {k: np.array(doc["values"][k], dtype=float).reshape(doc["shapes"][k])
                for k in PARAM_NAMES}
        return cls(activation=doc["activation"], **arrs)


@dataclass
class AdamState:
    """Adam moments for a dict of parameters; rate decays by ``decay`` each epoch."""

    lr: float = LEARNING_RATE
    decay: float = DECAY
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def rate(self, epoch: int) -> float:
        return self.lr * self.decay ** epoch


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              epoch: int) -> dict[str, np.ndarray]:
    """Apply one bias-corrected Adam update in place and return ``params``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise OptimizationError(f"non-finite gradient for {name}")
    state.step += 1
    lr = state.rate(epoch)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params

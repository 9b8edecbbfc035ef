"""Dense float64 multilayer perceptron with hand-written reverse-mode gradients.

Everything is batch-first: inputs are (batch, dim) arrays. The networks here
are tiny, so the implementation favors determinism and checkability over
speed: plain numpy matmuls, 64-bit throughout, no in-place aliasing tricks.
"""

from __future__ import annotations

import math

import numpy as np

ACTIVATIONS = ("identity", "relu", "tanh")


class DimensionError(ValueError):
    """Operand shapes do not compose."""


class StateError(RuntimeError):
    """Operation called out of order (e.g. backward before forward)."""


def _check_activation(name: str) -> None:
    if name not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}, expected one of {ACTIVATIONS}")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # y is the cached activation output so tanh' avoids recomputing tanh(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - y * y
    return np.ones_like(z)


class MLP:
    """Fully connected net: weights[k] has shape (layer_dims[k], layer_dims[k+1]).

    Hidden layers default to relu; the output layer defaults to identity.
    Weights and biases are drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    using the supplied generator, so identical seeds give identical nets.
    """

    def __init__(
        self,
        layer_dims: list[int] | tuple[int, ...],
        activations: list[str] | tuple[str, ...] | None = None,
        rng: np.random.Generator | None = None,
    ):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"layer_dims must list at least two positive widths, got {dims}")
        n_layers = len(dims) - 1
        if activations is None:
            activations = ["relu"] * (n_layers - 1) + ["identity"]
        acts = [str(a) for a in activations]
        if len(acts) != n_layers:
            raise ValueError(f"need {n_layers} activations for {len(dims)} layer dims, got {len(acts)}")
        for a in acts:
            _check_activation(a)

        if rng is None:
            rng = np.random.default_rng(0)
        self.layer_dims = dims
        self.activations = acts
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.weight_grads = [np.zeros_like(w) for w in self.weights]
        self.bias_grads = [np.zeros_like(b) for b in self.biases]
        self._cache: list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None

    # -- parameter access -------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        """Live parameter arrays, interleaved as [W0, b0, W1, b1, ...]."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def gradients(self) -> list[np.ndarray]:
        """Live gradient arrays in the same order as parameters()."""
        out: list[np.ndarray] = []
        for gw, gb in zip(self.weight_grads, self.bias_grads):
            out.extend((gw, gb))
        return out

    def clone(self) -> "MLP":
        other = MLP(self.layer_dims, self.activations, rng=np.random.default_rng(0))
        for dst, src in zip(other.parameters(), self.parameters()):
            dst[...] = src
        return other

    # -- forward / backward ------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError(f"input must be 2-D (batch, features), got shape {x.shape}")
        if x.shape[1] != self.layer_dims[0]:
            raise DimensionError(
                f"input has {x.shape[1]} features, net expects {self.layer_dims[0]}"
            )
        cache = []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            z = h @ w + b
            y = _apply_activation(act, z)
            cache.append((h, z, y))
            h = y
        self._cache = cache
        return h

    def backward(self, output_grad: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("backward called before forward")
        g = np.asarray(output_grad, dtype=np.float64)
        out_shape = self._cache[-1][2].shape
        if g.shape != out_shape:
            raise DimensionError(f"output_grad shape {g.shape} does not match forward output {out_shape}")
        for k in range(len(self.weights) - 1, -1, -1):
            h, z, y = self._cache[k]
            dz = g * _activation_grad(self.activations[k], z, y)
            self.weight_grads[k] += h.T @ dz
            self.bias_grads[k] += dz.sum(axis=0)
            g = dz @ self.weights[k].T
        return g

    def zero_grads(self) -> None:
        for g in self.gradients():
            g[...] = 0.0

    # -- updates -----------------------------------------------------------

    def sgd_step(self, learning_rate: float, clip_norm: float | None = None) -> None:
        """In-place descent step; gradients are zeroed afterwards.

        A zero learning rate is a no-op (still clears gradients); negative
        rates are rejected.
        """
        sgd_step_params(self.parameters(), self.gradients(), learning_rate, clip_norm)

    def __repr__(self) -> str:
        return f"MLP(dims={self.layer_dims}, activations={self.activations})"


def global_grad_norm(grads: list[np.ndarray]) -> float:
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    return math.sqrt(total)


def clip_gradients(grads: list[np.ndarray], clip_norm: float) -> float:
    """Scale grads in place so their global L2 norm is at most clip_norm."""
    norm = global_grad_norm(grads)
    if norm > clip_norm and norm > 0.0:
        scale = clip_norm / norm
        for g in grads:
            g *= scale
    return norm


def sgd_step_params(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    learning_rate: float,
    clip_norm: float | None = None,
) -> None:
    if learning_rate < 0.0:
        raise ValueError(f"learning rate must be non-negative, got {learning_rate}")
    if clip_norm is not None:
        clip_gradients(grads, clip_norm)
    for p, g in zip(params, grads):
        p -= learning_rate * g
        g[...] = 0.0


class Adam:
    """Adam on a net exposing parameters()/gradients(); optional global clip.

    Kept alongside plain SGD because bootstrapped value targets make raw SGD
    step sizes awkward to tune; the gradient checks all run against the same
    backward pass either way.
    """

    def __init__(
        self,
        net,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        clip_norm: float | None = None,
    ):
        if learning_rate < 0.0:
            raise ValueError(f"learning rate must be non-negative, got {learning_rate}")
        self.net = net
        self.lr = float(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self) -> None:
        params = self.net.parameters()
        grads = self.net.gradients()
        if self.clip_norm is not None:
            clip_gradients(grads, self.clip_norm)
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            g[...] = 0.0


class SGD:
    """Uniform-interface wrapper over sgd_step for the agent's optimizers."""

    def __init__(self, net, learning_rate: float, clip_norm: float | None = None):
        if learning_rate < 0.0:
            raise ValueError(f"learning rate must be non-negative, got {learning_rate}")
        self.net = net
        self.lr = float(learning_rate)
        self.clip_norm = clip_norm

    def step(self) -> None:
        sgd_step_params(self.net.parameters(), self.net.gradients(), self.lr, self.clip_norm)


def copy_params(src, dst, tau: float) -> None:
    """dst <- tau * src + (1 - tau) * dst over matching parameter lists.

    Works on anything exposing parameters(); both nets must have identical
    architectures (same number and shapes of parameter arrays).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    src_params = src.parameters()
    dst_params = dst.parameters()
    if len(src_params) != len(dst_params):
        raise DimensionError(
            f"architecture mismatch: {len(src_params)} vs {len(dst_params)} parameter arrays"
        )
    for s, d in zip(src_params, dst_params):
        if s.shape != d.shape:
            raise DimensionError(f"parameter shape mismatch: {s.shape} vs {d.shape}")
        d *= 1.0 - tau
        d += tau * s

"""Policy network built by fusing first-layer features of trained policies.

Each previously trained "primitive" policy contributes its first linear
layer, kept frozen. For an input x the n primitive features
h_i = relu(W_i^T x + b_i) (all of width d) are combined along three
pathways and concatenated:

    fused = [h_1 + ... + h_n] || [h_1 * ... * h_n] || [W_fc^T (h_1 || ... || h_n) + b_fc]

giving a 3d-wide feature regardless of n (W_fc has shape (n*d, d)). A small
trainable head maps the fused feature to a tanh-bounded action. Training
touches only W_fc, b_fc, and the head; the primitive layers are immutable.
"""

from __future__ import annotations

import numpy as np

from .numkit import MLP, DimensionError, StateError


class PrimitiveLayer:
    """Frozen first layer of a trained policy: weight (in_dim, d), bias (d,).

    Arrays are copied and marked read-only at construction; source_id keeps
    the provenance (checkpoint hash) of the originating policy.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray, source_id: str = ""):
        w = np.array(weight, dtype=np.float64)
        b = np.array(bias, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError(f"primitive weight must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[1],):
            raise DimensionError(f"primitive bias shape {b.shape} does not match weight {w.shape}")
        w.setflags(write=False)
        b.setflags(write=False)
        self.weight = w
        self.bias = b
        self.source_id = source_id

    @property
    def input_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]


def extract_first_layer(checkpoint) -> PrimitiveLayer:
    """Pull the frozen first layer out of a saved MLP actor.

    Accepts a loaded actor checkpoint (kind "mlp_actor" with at least one
    hidden layer); the primitive's source_id is the checkpoint's content hash.
    """
    if checkpoint.kind != "mlp_actor":
        raise ValueError(f"can only extract from an mlp_actor checkpoint, got kind {checkpoint.kind!r}")
    net = checkpoint.to_mlp()
    if len(net.weights) < 2:
        raise DimensionError(
            f"actor with layer dims {net.layer_dims} has no hidden layer to extract"
        )
    return PrimitiveLayer(net.weights[0], net.biases[0], source_id=checkpoint.content_hash())


def fuse_features(
    h: list[np.ndarray] | tuple[np.ndarray, ...],
    fc_weight: np.ndarray,
    fc_bias: np.ndarray,
) -> np.ndarray:
    """Combine n feature rows (batch, d) into (batch, 3d).

    Segments are elementwise sum, elementwise product, and a linear map of
    the concatenated features back to width d.
    """
    if not h:
        raise DimensionError("need at least one feature to fuse")
    hs = [np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in h]
    d = hs[0].shape[1]
    for x in hs:
        if x.shape != hs[0].shape:
            raise DimensionError(f"feature shapes differ: {x.shape} vs {hs[0].shape}")
    n = len(hs)
    if fc_weight.shape != (n * d, d):
        raise DimensionError(f"fc weight shape {fc_weight.shape} does not match (n*d, d) = ({n * d}, {d})")
    if fc_bias.shape != (d,):
        raise DimensionError(f"fc bias shape {fc_bias.shape} does not match (d,) = ({d},)")
    added = hs[0].copy()
    for x in hs[1:]:
        added += x
    multiplied = hs[0].copy()
    for x in hs[1:]:
        multiplied *= x
    concat = np.concatenate(hs, axis=1)
    linear = concat @ fc_weight + fc_bias
    return np.concatenate([added, multiplied, linear], axis=1)


def average_stack_weight(n: int, d: int) -> np.ndarray:
    """Initial fc weight whose output is the mean of the n input features."""
    w = np.zeros((n * d, d))
    eye = np.eye(d) / n
    for i in range(n):
        w[i * d : (i + 1) * d, :] = eye
    return w


class FusionPolicy:
    """Actor with a fused primitive front end and a trainable fusion + head.

    Exposes the same forward/backward/parameters interface as MLP so the
    actor-critic training loop and the target-network soft updates treat
    both interchangeably. By default the primitive layers are frozen and
    parameters()/gradients() cover only {fc_weight, fc_bias, head};
    freeze_primitives=False makes working copies of the primitive layers
    trainable as well. pre_activation_features=True fuses the raw linear
    outputs instead of their relu images.
    """

    def __init__(
        self,
        primitives: list[PrimitiveLayer] | tuple[PrimitiveLayer, ...],
        head: MLP,
        fc_weight: np.ndarray | None = None,
        fc_bias: np.ndarray | None = None,
        freeze_primitives: bool = True,
        pre_activation_features: bool = False,
    ):
        if len(primitives) < 1:
            raise DimensionError("fusion needs at least one primitive layer")
        in_dim = primitives[0].input_dim
        d = primitives[0].feature_dim
        for p in primitives:
            if p.input_dim != in_dim:
                raise DimensionError(f"primitive input dims differ: {p.input_dim} vs {in_dim}")
            if p.feature_dim != d:
                raise DimensionError(f"primitive feature dims differ: {p.feature_dim} vs {d}")
        if head.layer_dims[0] != 3 * d:
            raise DimensionError(f"head expects input width {head.layer_dims[0]}, fused feature is {3 * d}")
        self.primitives = tuple(primitives)
        self.head = head
        self.n = len(self.primitives)
        self.d = d
        self.input_dim = in_dim
        self.freeze_primitives = freeze_primitives
        self.pre_activation_features = pre_activation_features
        if freeze_primitives:
            self._prim_weights = [p.weight for p in self.primitives]  # read-only views
            self._prim_biases = [p.bias for p in self.primitives]
            self._prim_weight_grads: list[np.ndarray] = []
            self._prim_bias_grads: list[np.ndarray] = []
        else:
            self._prim_weights = [np.array(p.weight) for p in self.primitives]
            self._prim_biases = [np.array(p.bias) for p in self.primitives]
            self._prim_weight_grads = [np.zeros_like(w) for w in self._prim_weights]
            self._prim_bias_grads = [np.zeros_like(b) for b in self._prim_biases]
        self.fc_weight = (
            np.array(fc_weight, dtype=np.float64)
            if fc_weight is not None
            else average_stack_weight(self.n, d)
        )
        self.fc_bias = (
            np.array(fc_bias, dtype=np.float64) if fc_bias is not None else np.zeros(d)
        )
        if self.fc_weight.shape != (self.n * d, d):
            raise DimensionError(
                f"fc weight shape {self.fc_weight.shape} does not match ({self.n * d}, {d})"
            )
        if self.fc_bias.shape != (d,):
            raise DimensionError(f"fc bias shape {self.fc_bias.shape} does not match ({d},)")
        self.fc_weight_grad = np.zeros_like(self.fc_weight)
        self.fc_bias_grad = np.zeros_like(self.fc_bias)
        self._cache = None

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(p.source_id for p in self.primitives)

    def primitive_weight(self, i: int) -> np.ndarray:
        return self._prim_weights[i]

    def primitive_bias(self, i: int) -> np.ndarray:
        return self._prim_biases[i]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        if not self.freeze_primitives:
            for w, b in zip(self._prim_weights, self._prim_biases):
                out.extend((w, b))
        out.extend((self.fc_weight, self.fc_bias))
        return out + self.head.parameters()

    def gradients(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        if not self.freeze_primitives:
            for gw, gb in zip(self._prim_weight_grads, self._prim_bias_grads):
                out.extend((gw, gb))
        out.extend((self.fc_weight_grad, self.fc_bias_grad))
        return out + self.head.gradients()

    def clone(self) -> "FusionPolicy":
        # frozen primitives are immutable and shared; trainable ones are
        # copied via the PrimitiveLayer snapshot below
        prims = self.primitives
        if not self.freeze_primitives:
            prims = tuple(
                PrimitiveLayer(w, b, p.source_id)
                for w, b, p in zip(self._prim_weights, self._prim_biases, self.primitives)
            )
        return FusionPolicy(
            prims,
            self.head.clone(),
            self.fc_weight,
            self.fc_bias,
            freeze_primitives=self.freeze_primitives,
            pre_activation_features=self.pre_activation_features,
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError(f"input must be 2-D (batch, features), got shape {x.shape}")
        if x.shape[1] != self.input_dim:
            raise DimensionError(f"input has {x.shape[1]} features, primitives expect {self.input_dim}")
        zs = [x @ w + b for w, b in zip(self._prim_weights, self._prim_biases)]
        if self.pre_activation_features:
            hs = zs
        else:
            hs = [np.maximum(z, 0.0) for z in zs]
        fused = fuse_features(hs, self.fc_weight, self.fc_bias)
        self._cache = (x, zs, hs)
        return self.head.forward(fused)

    def backward(self, output_grad: np.ndarray) -> np.ndarray:
        """Populate trainable gradients; return the gradient w.r.t. the input.

        Frozen primitive parameters receive no gradient storage; the input
        gradient still flows through them so the actor can be chained under
        a critic.
        """
        if self._cache is None:
            raise StateError("backward called before forward")
        x, zs, hs = self._cache
        d = self.d
        g_fused = self.head.backward(output_grad)

        g_sum = g_fused[:, :d]
        g_prod = g_fused[:, d : 2 * d]
        g_lin = g_fused[:, 2 * d :]

        concat = np.concatenate(hs, axis=1)
        self.fc_weight_grad += concat.T @ g_lin
        self.fc_bias_grad += g_lin.sum(axis=0)
        g_concat = g_lin @ self.fc_weight.T

        input_grad = np.zeros_like(x)
        for i, (z, w) in enumerate(zip(zs, self._prim_weights)):
            others = np.ones_like(hs[i])
            for j, hj in enumerate(hs):
                if j != i:
                    others *= hj
            g_hi = g_sum + g_prod * others + g_concat[:, i * d : (i + 1) * d]
            g_zi = g_hi if self.pre_activation_features else g_hi * (z > 0.0)
            if not self.freeze_primitives:
                self._prim_weight_grads[i] += x.T @ g_zi
                self._prim_bias_grads[i] += g_zi.sum(axis=0)
            input_grad += g_zi @ w.T
        return input_grad

    def zero_grads(self) -> None:
        for g in self.gradients():
            g[...] = 0.0

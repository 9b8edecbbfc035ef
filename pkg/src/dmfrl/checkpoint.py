"""Versioned binary persistence for actor and critic parameters.

File layout (little-endian throughout):

    bytes 0..3    magic "DMF1"
    bytes 4..7    format version, uint32
    bytes 8..11   header length H, uint32
    bytes 12..    H bytes of UTF-8 JSON: {"kind", "arch", "meta", "param_count"}
    rest          param_count float64 values in declared layer order

MLP parameters are flattened as W0, b0, W1, b1, ...; fusion actors add the
primitive layers first (W_i, b_i per primitive), then fc weight and bias,
then the head's parameters. Round trips are bit-exact, and loading validates
magic, version, and the parameter count implied by the architecture.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .fusion import FusionPolicy, PrimitiveLayer
from .numkit import MLP

MAGIC = b"DMF1"
FORMAT_VERSION = 1

KINDS = ("mlp_actor", "fusion_actor", "critic")


class CheckpointError(Exception):
    """Base class for checkpoint persistence failures."""


class MagicError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass


class TruncatedError(CheckpointError):
    pass


class ParamCountError(CheckpointError):
    pass


class KindError(CheckpointError):
    pass


def _mlp_param_count(layer_dims: list[int]) -> int:
    return sum(i * o + o for i, o in zip(layer_dims[:-1], layer_dims[1:]))


def _arch_param_count(kind: str, arch: dict) -> int:
    if kind == "fusion_actor":
        n, d, in_dim = arch["n"], arch["d"], arch["input_dim"]
        return n * (in_dim * d + d) + (n * d * d + d) + _mlp_param_count(arch["head_layer_dims"])
    return _mlp_param_count(arch["layer_dims"])


@dataclass
class Checkpoint:
    kind: str
    arch: dict
    params: np.ndarray
    meta: dict = field(default_factory=dict)
    file_hash: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindError(f"unknown checkpoint kind {self.kind!r}, expected one of {KINDS}")
        self.params = np.asarray(self.params, dtype=np.float64).ravel()
        expected = _arch_param_count(self.kind, self.arch)
        if len(self.params) != expected:
            raise ParamCountError(
                f"architecture implies {expected} parameters, got {len(self.params)}"
            )

    # -- construction from live nets -----------------------------------------

    @classmethod
    def from_mlp(cls, net: MLP, kind: str, meta: dict | None = None) -> "Checkpoint":
        if kind not in ("mlp_actor", "critic"):
            raise KindError(f"MLP checkpoints must be mlp_actor or critic, got {kind!r}")
        arch = {"layer_dims": list(net.layer_dims), "activations": list(net.activations)}
        params = np.concatenate([p.ravel() for p in net.parameters()])
        return cls(kind=kind, arch=arch, params=params, meta=dict(meta or {}))

    @classmethod
    def from_fusion(cls, policy: FusionPolicy, meta: dict | None = None) -> "Checkpoint":
        arch = {
            "n": policy.n,
            "d": policy.d,
            "input_dim": policy.input_dim,
            "source_ids": list(policy.source_ids),
            "head_layer_dims": list(policy.head.layer_dims),
            "head_activations": list(policy.head.activations),
            "frozen": policy.freeze_primitives,
            "pre_activation": policy.pre_activation_features,
        }
        parts = []
        for i in range(policy.n):
            parts.extend((policy.primitive_weight(i).ravel(), policy.primitive_bias(i).ravel()))
        parts.extend((policy.fc_weight.ravel(), policy.fc_bias.ravel()))
        parts.extend(p.ravel() for p in policy.head.parameters())
        return cls(kind="fusion_actor", arch=arch, params=np.concatenate(parts), meta=dict(meta or {}))

    # -- reconstruction --------------------------------------------------------

    def to_mlp(self) -> MLP:
        if self.kind == "fusion_actor":
            raise KindError("fusion_actor checkpoints rebuild via to_fusion()")
        net = MLP(self.arch["layer_dims"], self.arch["activations"], rng=np.random.default_rng(0))
        off = 0
        for p in net.parameters():
            p[...] = self.params[off : off + p.size].reshape(p.shape)
            off += p.size
        return net

    def to_fusion(self) -> FusionPolicy:
        if self.kind != "fusion_actor":
            raise KindError(f"to_fusion() needs a fusion_actor checkpoint, got {self.kind!r}")
        a = self.arch
        n, d, in_dim = a["n"], a["d"], a["input_dim"]
        off = 0

        def take(shape):
            nonlocal off
            size = int(np.prod(shape))
            out = self.params[off : off + size].reshape(shape)
            off += size
            return out

        primitives = []
        for i in range(n):
            w = take((in_dim, d))
            b = take((d,))
            primitives.append(PrimitiveLayer(w, b, source_id=a["source_ids"][i]))
        fc_w = take((n * d, d))
        fc_b = take((d,))
        head = MLP(a["head_layer_dims"], a["head_activations"], rng=np.random.default_rng(0))
        for p in head.parameters():
            p[...] = take(p.shape)
        return FusionPolicy(
            primitives,
            head,
            fc_weight=fc_w,
            fc_bias=fc_b,
            freeze_primitives=a.get("frozen", True),
            pre_activation_features=a.get("pre_activation", False),
        )

    def to_actor(self):
        return self.to_fusion() if self.kind == "fusion_actor" else self.to_mlp()

    # -- wire format -------------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = json.dumps(
            {
                "kind": self.kind,
                "arch": self.arch,
                "meta": self.meta,
                "param_count": int(len(self.params)),
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        out = bytearray()
        out += MAGIC
        out += FORMAT_VERSION.to_bytes(4, "little")
        out += len(header).to_bytes(4, "little")
        out += header
        out += self.params.astype("<f8").tobytes()
        return bytes(out)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def from_bytes(raw: bytes) -> Checkpoint:
    if len(raw) < 12:
        raise TruncatedError(f"file has only {len(raw)} bytes, header needs 12")
    if raw[:4] != MAGIC:
        raise MagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version = int.from_bytes(raw[4:8], "little")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    header_len = int.from_bytes(raw[8:12], "little")
    if len(raw) < 12 + header_len:
        raise TruncatedError(f"header claims {header_len} bytes, only {len(raw) - 12} present")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable header: {e}") from e
    body = raw[12 + header_len :]
    declared = int(header["param_count"])
    expected = _arch_param_count(header["kind"], header["arch"])
    if declared != expected:
        raise ParamCountError(
            f"header declares {declared} parameters, architecture implies {expected}"
        )
    if len(body) < 8 * declared:
        raise TruncatedError(
            f"parameter block has {len(body)} bytes, {8 * declared} expected"
        )
    if len(body) != 8 * declared:
        raise ParamCountError(
            f"parameter block has {len(body)} bytes, {8 * declared} expected"
        )
    params = np.frombuffer(body, dtype="<f8").astype(np.float64)
    ckpt = Checkpoint(kind=header["kind"], arch=header["arch"], params=params, meta=header["meta"])
    ckpt.file_hash = hashlib.sha256(raw).hexdigest()
    return ckpt


def save_checkpoint(path, ckpt: Checkpoint) -> str:
    """Write the checkpoint; returns its sha256 content hash."""
    raw = ckpt.to_bytes()
    with open(path, "wb") as fh:
        fh.write(raw)
    digest = hashlib.sha256(raw).hexdigest()
    ckpt.file_hash = digest
    return digest


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    return from_bytes(raw)

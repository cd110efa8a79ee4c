"""Portable frozen-model container: save, load, validate.

Layout (documented in FORMAT.md): 4-byte magic ``AZM1``, u32-LE format
version, u32-LE header length, UTF-8 JSON header (metadata, architecture
spec, ordered tensor directory), the tensors as concatenated row-major
little-endian float32 blobs in directory order, and a trailing u32-LE CRC32
of the blob region.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumMismatchError,
    ConfigError,
    SpecInconsistencyError,
    TruncatedBlobError,
    UnsupportedVersionError,
)
from .network import C51Params, HeadKind, NetworkSpec

MAGIC = b"AZM1"
FORMAT_VERSION = 1

ALGORITHMS = ("A2C", "IMPALA", "DQN", "Rainbow", "ApeX", "ES", "GA", "Other")
CHECKPOINT_CRITERIA = ("final", "initial", "hours", "frames", "human_level")
CHECKPOINT_HOURS = (1, 2, 4, 6, 10)
CHECKPOINT_FRAMES = (400_000_000, 1_000_000_000)


@dataclass(frozen=True)
class CheckpointTag:
    """Which snapshot of a training run this model is."""

    criterion: str = "final"
    hours: int | None = None
    frames: int | None = None

    def __post_init__(self):
        if self.criterion not in CHECKPOINT_CRITERIA:
            raise ConfigError(f"unknown checkpoint criterion: {self.criterion!r}")
        if self.criterion == "hours" and self.hours not in CHECKPOINT_HOURS:
            raise ConfigError(f"hours checkpoint must be one of {CHECKPOINT_HOURS}")
        if self.criterion == "frames" and self.frames not in CHECKPOINT_FRAMES:
            raise ConfigError(f"frames checkpoint must be one of {CHECKPOINT_FRAMES}")

    def label(self) -> str:
        if self.criterion == "hours":
            return f"hours:{self.hours}"
        if self.criterion == "frames":
            return f"frames:{self.frames}"
        return self.criterion

    @staticmethod
    def parse(label: str) -> "CheckpointTag":
        if label.startswith("hours:"):
            return CheckpointTag("hours", hours=int(label.split(":", 1)[1]))
        if label.startswith("frames:"):
            return CheckpointTag("frames", frames=int(label.split(":", 1)[1]))
        return CheckpointTag(label)


@dataclass(frozen=True)
class ModelMeta:
    game: str = "toy-catch"
    algorithm: str = "Other"
    run_id: str = "r0"
    checkpoint: CheckpointTag = field(default_factory=CheckpointTag)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")


@dataclass
class FrozenModel:
    """An immutable snapshot: architecture spec, named tensors, provenance."""

    spec: NetworkSpec
    tensors: dict[str, np.ndarray]
    meta: ModelMeta

    def label(self) -> str:
        return f"{self.meta.algorithm}/{self.meta.run_id}"

    def copy(self) -> "FrozenModel":
        return FrozenModel(self.spec, {k: v.copy() for k, v in self.tensors.items()}, self.meta)


@dataclass(frozen=True)
class Violation:
    tensor: str
    kind: str  # "missing" | "extra" | "shape"
    expected: tuple[int, ...] | None = None
    actual: tuple[int, ...] | None = None

    def __str__(self) -> str:
        if self.kind == "missing":
            return f"{self.tensor}: missing (expected shape {self.expected})"
        if self.kind == "extra":
            return f"{self.tensor}: not part of the spec"
        return f"{self.tensor}: expected shape {self.expected}, got {self.actual}"


def validate_model(model: FrozenModel) -> list[Violation]:
    """Check every spec-implied tensor exists with the right shape, and
    nothing else is present. Violations are data, not exceptions."""
    out: list[Violation] = []
    expected = model.spec.tensor_shapes()
    for name, shape in expected.items():
        if name not in model.tensors:
            out.append(Violation(name, "missing", expected=shape))
        elif tuple(model.tensors[name].shape) != shape:
            out.append(Violation(name, "shape", expected=shape, actual=tuple(model.tensors[name].shape)))
    for name in model.tensors:
        if name not in expected:
            out.append(Violation(name, "extra"))
    return out


def _spec_to_json(spec: NetworkSpec) -> dict:
    return {
        "conv_layers": [list(l) for l in spec.conv_layers],
        "fc_width": spec.fc_width,
        "head": spec.head.value,
        "n_actions": spec.n_actions,
        "c51": None
        if spec.c51 is None
        else {"n_atoms": spec.c51.n_atoms, "v_min": spec.c51.v_min, "v_max": spec.c51.v_max},
        "in_channels": spec.in_channels,
        "input_hw": list(spec.input_hw),
    }


def _spec_from_json(d: dict) -> NetworkSpec:
    try:
        c51 = d.get("c51")
        return NetworkSpec(
            n_actions=d["n_actions"],
            head=HeadKind(d["head"]),
            conv_layers=tuple(tuple(l) for l in d["conv_layers"]),
            fc_width=d["fc_width"],
            c51=None if c51 is None else C51Params(c51["n_atoms"], c51["v_min"], c51["v_max"]),
            in_channels=d.get("in_channels", 4),
            input_hw=tuple(d.get("input_hw", (84, 84))),
        )
    except (KeyError, ValueError, ConfigError) as e:
        raise SpecInconsistencyError(f"invalid architecture spec in header: {e}") from e


def _meta_to_json(meta: ModelMeta) -> dict:
    return {
        "game": meta.game,
        "algorithm": meta.algorithm,
        "run_id": meta.run_id,
        "checkpoint": meta.checkpoint.label(),
        "format_version": meta.format_version,
    }


def _meta_from_json(d: dict) -> ModelMeta:
    try:
        return ModelMeta(
            game=d["game"],
            algorithm=d["algorithm"],
            run_id=d["run_id"],
            checkpoint=CheckpointTag.parse(d["checkpoint"]),
            format_version=d["format_version"],
        )
    except (KeyError, ValueError, ConfigError) as e:
        raise SpecInconsistencyError(f"invalid metadata in header: {e}") from e


def save_model(model: FrozenModel, path: str | Path) -> None:
    """Write the container. Bit-exact: load(save(m)) reproduces every tensor
    byte and all metadata."""
    violations = validate_model(model)
    if violations:
        raise SpecInconsistencyError("; ".join(str(v) for v in violations))
    directory = []
    blobs = []
    for name in model.spec.tensor_shapes():
        t = model.tensors[name]
        if t.dtype != np.float32:
            raise SpecInconsistencyError(f"{name}: tensors must be float32 to freeze, got {t.dtype}")
        directory.append({"name": name, "shape": list(t.shape)})
        blobs.append(np.ascontiguousarray(t).astype("<f4", copy=False).tobytes())
    header = json.dumps(
        {"meta": _meta_to_json(model.meta), "spec": _spec_to_json(model.spec), "tensors": directory}
    ).encode("utf-8")
    blob = b"".join(blobs)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", model.meta.format_version))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(blob)
        f.write(struct.pack("<I", zlib.crc32(blob)))


def load_model(path: str | Path) -> FrozenModel:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a frozen-model container")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: format version {version} not supported")
    header_len = struct.unpack_from("<I", data, 8)[0]
    if len(data) < 12 + header_len:
        raise TruncatedBlobError(f"{path}: header truncated")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SpecInconsistencyError(f"{path}: malformed header: {e}") from e

    spec = _spec_from_json(header["spec"])
    meta = _meta_from_json(header["meta"])
    if meta.format_version != version:
        raise SpecInconsistencyError(
            f"{path}: header format_version {meta.format_version} != container version {version}"
        )

    expected = spec.tensor_shapes()
    directory = header.get("tensors", [])
    dir_names = [d["name"] for d in directory]
    if dir_names != list(expected):
        raise SpecInconsistencyError(
            f"{path}: tensor directory {dir_names} does not match spec tensors {list(expected)}"
        )
    for d in directory:
        if tuple(d["shape"]) != expected[d["name"]]:
            raise SpecInconsistencyError(
                f"{path}: {d['name']}: directory shape {tuple(d['shape'])} != spec shape {expected[d['name']]}"
            )

    blob_len = sum(int(np.prod(d["shape"])) * 4 for d in directory)
    blob_start = 12 + header_len
    if len(data) < blob_start + blob_len + 4:
        raise TruncatedBlobError(f"{path}: tensor region truncated")
    blob = data[blob_start : blob_start + blob_len]
    stored_crc = struct.unpack_from("<I", data, blob_start + blob_len)[0]
    if zlib.crc32(blob) != stored_crc:
        raise ChecksumMismatchError(f"{path}: tensor checksum mismatch")

    tensors: dict[str, np.ndarray] = {}
    off = 0
    for d in directory:
        shape = tuple(d["shape"])
        nbytes = int(np.prod(shape)) * 4
        arr = np.frombuffer(blob[off : off + nbytes], dtype="<f4").reshape(shape)
        tensors[d["name"]] = np.ascontiguousarray(arr).astype(np.float32, copy=False)
        off += nbytes
    return FrozenModel(spec=spec, tensors=tensors, meta=meta)


def random_model(
    spec: NetworkSpec,
    meta: ModelMeta | None = None,
    seed: int = 0,
    dtype=np.float32,
    bias_scale: float = 0.0,
) -> FrozenModel:
    """A freshly initialized model (He-scaled weights), mostly for fixtures,
    baselines and the CLI's ``init-model``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tensors: dict[str, np.ndarray] = {}
    for name, shape in spec.tensor_shapes().items():
        if name.endswith(".b"):
            t = rng.normal(0.0, bias_scale, size=shape) if bias_scale > 0 else np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            t = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        tensors[name] = t.astype(dtype)
    return FrozenModel(spec=spec, tensors=tensors, meta=meta or ModelMeta())


def perturb_conv_weights(model: FrozenModel, sigma: float, rng: np.random.Generator) -> FrozenModel:
    """A copy of the model with N(0, sigma^2) noise added to every conv
    weight tensor. Biases and everything after the convolutions are shared
    untouched; the input model is never mutated."""
    tensors = dict(model.tensors)
    for i in range(1, len(model.spec.conv_layers) + 1):
        name = f"conv{i}.w"
        w = model.tensors[name]
        tensors[name] = (w + rng.normal(0.0, sigma, size=w.shape)).astype(w.dtype)
    return FrozenModel(model.spec, tensors, model.meta)

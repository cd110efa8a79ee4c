"""Policy-network architecture: spec record, heads, traces and gradients.

The architecture is the classic vision-control stack: three valid
convolutions over a 4x84x84 observation (84 -> 20 -> 9 -> 7 spatially with
the default kernels/strides), one hidden fully-connected layer, then one of
four output heads. Channel counts, kernel sizes and input geometry all live
in `NetworkSpec` so nonstandard snapshots stay loadable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError

if TYPE_CHECKING:  # pragma: no cover
    from .model_io import FrozenModel


class HeadKind(str, Enum):
    Q = "q"
    DUELING = "dueling"
    C51 = "c51"
    ACTOR_CRITIC = "actor_critic"


@dataclass(frozen=True)
class C51Params:
    n_atoms: int = 51
    v_min: float = -10.0
    v_max: float = 10.0

    def atoms(self) -> np.ndarray:
        return np.linspace(self.v_min, self.v_max, self.n_atoms)


DEFAULT_CONV_LAYERS = ((32, 8, 4), (64, 4, 2), (64, 3, 1))


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture record: (out_channels, kernel, stride) per conv layer,
    hidden width, head kind and action count."""

    n_actions: int
    head: HeadKind = HeadKind.Q
    conv_layers: tuple[tuple[int, int, int], ...] = DEFAULT_CONV_LAYERS
    fc_width: int = 512
    c51: C51Params | None = None
    in_channels: int = 4
    input_hw: tuple[int, int] = (84, 84)

    def __post_init__(self):
        object.__setattr__(self, "head", HeadKind(self.head))
        object.__setattr__(
            self, "conv_layers", tuple(tuple(int(v) for v in layer) for layer in self.conv_layers)
        )
        object.__setattr__(self, "input_hw", tuple(int(v) for v in self.input_hw))
        if self.n_actions < 1:
            raise ConfigError("n_actions must be positive")
        if not self.conv_layers:
            raise ConfigError("at least one conv layer is required")
        if (self.head is HeadKind.C51) != (self.c51 is not None):
            raise ConfigError("c51 parameters must be present exactly when the head is c51")
        self.conv_shapes()  # validates the spatial chain

    def conv_shapes(self) -> list[tuple[int, int, int]]:
        """Per-layer output (C, H, W), validating the spatial chain."""
        c, (h, w) = self.in_channels, self.input_hw
        out = []
        for o, k, s in self.conv_layers:
            h = ops.conv_output_size(h, k, s)
            w = ops.conv_output_size(w, k, s)
            c = o
            out.append((c, h, w))
        return out

    def flat_size(self) -> int:
        c, h, w = self.conv_shapes()[-1]
        return c * h * w

    def head_tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        n, fw = self.n_actions, self.fc_width
        if self.head is HeadKind.Q:
            return {"head.w": (n, fw), "head.b": (n,)}
        if self.head is HeadKind.DUELING:
            return {
                "head.v.w": (1, fw),
                "head.v.b": (1,),
                "head.a.w": (n, fw),
                "head.a.b": (n,),
            }
        if self.head is HeadKind.C51:
            na = n * self.c51.n_atoms
            return {"head.w": (na, fw), "head.b": (na,)}
        return {
            "head.pi.w": (n, fw),
            "head.pi.b": (n,),
            "head.v.w": (1, fw),
            "head.v.b": (1,),
        }

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        """Ordered name -> shape map of every tensor the spec implies."""
        shapes: dict[str, tuple[int, ...]] = {}
        c = self.in_channels
        for i, (o, k, _s) in enumerate(self.conv_layers, start=1):
            shapes[f"conv{i}.w"] = (o, c, k, k)
            shapes[f"conv{i}.b"] = (o,)
            c = o
        shapes["fc.w"] = (self.fc_width, self.flat_size())
        shapes["fc.b"] = (self.fc_width,)
        shapes.update(self.head_tensor_shapes())
        return shapes

    def layer_names(self) -> list[str]:
        return [f"conv{i}" for i in range(1, len(self.conv_layers) + 1)] + ["fc"]


def default_spec(n_actions: int, head: HeadKind | str = HeadKind.Q, c51: C51Params | None = None) -> NetworkSpec:
    head = HeadKind(head)
    if head is HeadKind.C51 and c51 is None:
        c51 = C51Params()
    return NetworkSpec(n_actions=n_actions, head=head, c51=c51)


@dataclass
class HeadOutput:
    raw: np.ndarray
    q: np.ndarray
    value: float | None = None
    dist: np.ndarray | None = None


@dataclass
class ActivationTrace:
    """Post-rectifier layer outputs for one observation, plus the head."""

    convs: tuple[np.ndarray, ...]
    fc: np.ndarray
    head_raw: np.ndarray
    head_q: np.ndarray
    chosen_action: int
    value: float | None = None

    @property
    def conv1(self) -> np.ndarray:
        return self.convs[0]

    @property
    def conv2(self) -> np.ndarray:
        return self.convs[1]

    @property
    def conv3(self) -> np.ndarray:
        return self.convs[2]

    def layer(self, name: str) -> np.ndarray:
        if name.startswith("conv"):
            idx = int(name[4:]) - 1
            if not 0 <= idx < len(self.convs):
                raise ConfigError(f"no such conv layer: {name}")
            return self.convs[idx]
        if name == "fc":
            return self.fc
        if name == "head_raw":
            return self.head_raw
        if name == "head_q":
            return self.head_q
        raise ConfigError(f"unknown layer name: {name}")


@dataclass(frozen=True)
class Objective:
    """A scalar to differentiate: one unit, one conv channel, or one output.

    Conv-channel objectives mean the spatial map; conv/fc unit objectives
    read the pre-rectifier response (so gradients do not vanish on units the
    rectifier currently gates off); ``output`` indexes the post-head
    per-action values.
    """

    layer: str
    channel: int | None = None
    unit: int | tuple[int, int, int] | None = None

    def validate(self, spec: NetworkSpec) -> None:
        conv_names = [f"conv{i}" for i in range(1, len(spec.conv_layers) + 1)]
        if self.layer in conv_names:
            c, h, w = spec.conv_shapes()[conv_names.index(self.layer)]
            if (self.channel is None) == (self.unit is None):
                raise ConfigError("conv objective needs exactly one of channel or unit")
            if self.channel is not None and not 0 <= self.channel < c:
                raise ConfigError(f"channel {self.channel} out of range for {self.layer}")
            if self.unit is not None:
                uc, uy, ux = self.unit
                if not (0 <= uc < c and 0 <= uy < h and 0 <= ux < w):
                    raise ConfigError(f"unit {self.unit} out of range for {self.layer}")
        elif self.layer == "fc":
            if not isinstance(self.unit, (int, np.integer)) or not 0 <= self.unit < spec.fc_width:
                raise ConfigError(f"fc objective needs a unit index in [0, {spec.fc_width})")
        elif self.layer == "output":
            if not isinstance(self.unit, (int, np.integer)) or not 0 <= self.unit < spec.n_actions:
                raise ConfigError(f"output objective needs an action index in [0, {spec.n_actions})")
        else:
            raise ConfigError(f"unknown objective layer: {self.layer}")


def head_forward(features: np.ndarray, spec: NetworkSpec, tensors: dict[str, np.ndarray]) -> HeadOutput:
    """Map hidden features to per-action values (plus head-specific extras)."""
    kind = spec.head
    if kind is HeadKind.Q:
        raw = ops.fc_forward(features, tensors["head.w"], tensors["head.b"])
        return HeadOutput(raw=raw, q=raw)
    if kind is HeadKind.DUELING:
        v = ops.fc_forward(features, tensors["head.v.w"], tensors["head.v.b"])
        a = ops.fc_forward(features, tensors["head.a.w"], tensors["head.a.b"])
        q = (v[0] + a - a.mean()).astype(features.dtype, copy=False)
        return HeadOutput(raw=np.concatenate([v, a]), q=q, value=float(v[0]))
    if kind is HeadKind.C51:
        if spec.c51 is None:
            raise ConfigError("c51 head requires c51 parameters")
        logits = ops.fc_forward(features, tensors["head.w"], tensors["head.b"])
        p = ops.softmax(logits.reshape(spec.n_actions, spec.c51.n_atoms), axis=1)
        q = (p.astype(np.float64) @ spec.c51.atoms()).astype(features.dtype)
        return HeadOutput(raw=logits, q=q)
    # actor-critic: per-action policy logits plus one state-value output
    logits = ops.fc_forward(features, tensors["head.pi.w"], tensors["head.pi.b"])
    v = ops.fc_forward(features, tensors["head.v.w"], tensors["head.v.b"])
    return HeadOutput(
        raw=np.concatenate([logits, v]),
        q=logits,
        value=float(v[0]),
        dist=ops.softmax(logits),
    )


def _head_feature_gradient(
    spec: NetworkSpec, tensors: dict[str, np.ndarray], features: np.ndarray, action: int
) -> np.ndarray:
    """d head_q[action] / d features."""
    kind = spec.head
    if kind is HeadKind.Q:
        return tensors["head.w"][action].astype(np.float64)
    if kind is HeadKind.DUELING:
        n = spec.n_actions
        da = -np.full(n, 1.0 / n)
        da[action] += 1.0
        return tensors["head.v.w"][0].astype(np.float64) + da @ tensors["head.a.w"].astype(np.float64)
    if kind is HeadKind.C51:
        atoms = spec.c51.atoms()
        na = spec.c51.n_atoms
        logits = ops.fc_forward(features, tensors["head.w"], tensors["head.b"])
        p = ops.softmax(logits.reshape(spec.n_actions, na), axis=1)[action].astype(np.float64)
        qa = float(p @ atoms)
        dlogits = p * (atoms - qa)
        wa = tensors["head.w"][action * na : (action + 1) * na].astype(np.float64)
        return dlogits @ wa
    return tensors["head.pi.w"][action].astype(np.float64)


class _ForwardCache:
    __slots__ = ("x", "conv_pre", "conv_post", "conv_caches", "flat", "fc_pre", "fc_post", "head")

    def __init__(self):
        self.conv_pre = []
        self.conv_post = []
        self.conv_caches = []


def _forward_cache(model: "FrozenModel", obs: np.ndarray) -> _ForwardCache:
    spec = model.spec
    t = model.tensors
    expect = (spec.in_channels, *spec.input_hw)
    if tuple(obs.shape) != expect:
        raise ShapeError(f"observation: expected shape {expect}, got {tuple(obs.shape)}")
    cache = _ForwardCache()
    cache.x = obs
    x = obs[None]
    for i, (_o, _k, s) in enumerate(spec.conv_layers, start=1):
        pre, cc = ops.conv2d_forward_batch(x, t[f"conv{i}.w"], t[f"conv{i}.b"], s)
        post = ops.relu(pre)
        cache.conv_pre.append(pre)
        cache.conv_post.append(post)
        cache.conv_caches.append(cc)
        x = post
    cache.flat = x.reshape(1, -1)
    fc_pre, fc_cache = ops.fc_forward_batch(cache.flat, t["fc.w"], t["fc.b"])
    cache.fc_pre = fc_pre[0]
    cache.fc_post = ops.relu(cache.fc_pre)
    cache.head = head_forward(cache.fc_post, spec, t)
    return cache


def forward_with_trace(model: "FrozenModel", obs: np.ndarray) -> ActivationTrace:
    """Run the network over one observation, recording every layer output.

    The chosen action is the argmax over per-action values; exact ties
    resolve to the lowest action index.
    """
    c = _forward_cache(model, obs)
    return ActivationTrace(
        convs=tuple(p[0] for p in c.conv_post),
        fc=c.fc_post,
        head_raw=c.head.raw,
        head_q=c.head.q,
        chosen_action=int(np.argmax(c.head.q)),
        value=c.head.value,
    )


def objective_value(model: "FrozenModel", obs: np.ndarray, objective: Objective) -> float:
    """The scalar an `Objective` denotes, at this observation."""
    objective.validate(model.spec)
    c = _forward_cache(model, obs)
    if objective.layer == "output":
        return float(c.head.q[objective.unit])
    if objective.layer == "fc":
        return float(c.fc_pre[objective.unit])
    idx = int(objective.layer[4:]) - 1
    pre = c.conv_pre[idx][0]
    if objective.channel is not None:
        return float(pre[objective.channel].mean(dtype=np.float64))
    uc, uy, ux = objective.unit
    return float(pre[uc, uy, ux])


def input_gradient(model: "FrozenModel", obs: np.ndarray, objective: Objective) -> np.ndarray:
    """d(objective scalar)/d(observation) by reverse-mode differentiation."""
    objective.validate(model.spec)
    spec = model.spec
    cache = _forward_cache(model, obs)
    n_conv = len(spec.conv_layers)

    # Seed at the objective's anchor, then walk the chain back to the input.
    start_conv: int  # first conv layer whose backward pass still runs
    if objective.layer == "output":
        dfeat = _head_feature_gradient(spec, model.tensors, cache.fc_post, int(objective.unit))
        dfc_pre = ops.relu_backward(dfeat, cache.fc_pre)
        dflat, _, _ = ops.fc_backward_batch(
            dfc_pre[None].astype(obs.dtype, copy=False), (cache.flat, model.tensors["fc.w"])
        )
        dpost = dflat.reshape(cache.conv_post[-1].shape)
        dpre = ops.relu_backward(dpost, cache.conv_pre[-1])
        start_conv = n_conv - 1
    elif objective.layer == "fc":
        dfc_pre = np.zeros_like(cache.fc_pre)
        dfc_pre[objective.unit] = 1.0
        dflat, _, _ = ops.fc_backward_batch(dfc_pre[None], (cache.flat, model.tensors["fc.w"]))
        dpost = dflat.reshape(cache.conv_post[-1].shape)
        dpre = ops.relu_backward(dpost, cache.conv_pre[-1])
        start_conv = n_conv - 1
    else:
        idx = int(objective.layer[4:]) - 1
        dpre = np.zeros_like(cache.conv_pre[idx])
        if objective.channel is not None:
            _, _, h, w = dpre.shape
            dpre[0, objective.channel] = 1.0 / (h * w)
        else:
            uc, uy, ux = objective.unit
            dpre[0, uc, uy, ux] = 1.0
        start_conv = idx

    for i in range(start_conv, -1, -1):
        dx, _, _ = ops.conv2d_backward_batch(dpre, cache.conv_caches[i])
        if i == 0:
            return dx[0]
        dpre = ops.relu_backward(dx, cache.conv_pre[i - 1])
    raise AssertionError("unreachable")

"""Rollout recording and the on-disk rollout archive.

An archive is a directory: ``manifest.json`` plus one binary file per
stream (raw frames, observations, RAM, optional per-layer activations) and
``steps.json`` for the scalar per-step columns. All binary streams are
little-endian and row-major so the round trip is bit-exact, and the
manifest records a CRC32 per stream file so corruption is detected at load.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatchError, ConfigError, MissingStreamError, StreamLengthError
from .model_io import FrozenModel, ModelMeta, _meta_from_json, _meta_to_json
from .network import ActivationTrace, forward_with_trace
from .ops import softmax
from .preprocessing import FRAME_HEIGHT, FRAME_WIDTH, OBS_SIZE, OBS_STACK, FrameStacker, grayscale_downsample

DEFAULT_MAX_STEPS = 2500

MANIFEST_NAME = "manifest.json"
STEPS_NAME = "steps.json"


@dataclass
class StepRecord:
    frame: np.ndarray  # 210x160x3 uint8, the frame the agent acted on
    obs: np.ndarray  # 4x84x84 float32 in [0,1]
    ram: np.ndarray  # 128 bytes
    action: int
    reward: float
    score: float  # cumulative reward through this step
    done: bool


@dataclass
class RolloutMeta:
    model_meta: ModelMeta
    env_id: str
    seed: int
    policy_mode: str


@dataclass
class Rollout:
    meta: RolloutMeta
    steps: list[StepRecord] = field(default_factory=list)
    traces: list[ActivationTrace] | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def observations(self) -> np.ndarray:
        return np.stack([s.obs for s in self.steps]) if self.steps else np.empty((0, OBS_STACK, OBS_SIZE, OBS_SIZE), np.float32)

    def ram_matrix(self) -> np.ndarray:
        return np.stack([s.ram for s in self.steps]) if self.steps else np.empty((0, 128), np.uint8)

    def scores(self) -> np.ndarray:
        return np.array([s.score for s in self.steps], dtype=np.float64)


def record_rollout(
    model: FrozenModel,
    env,
    max_steps: int = DEFAULT_MAX_STEPS,
    policy_mode: str = "greedy",
    seed: int = 0,
    capture_activations: bool = False,
) -> Rollout:
    """Run the frozen policy in the environment and record every step.

    ``greedy`` takes the argmax action; ``sample`` draws from the softmax
    over per-action values with a generator seeded from ``seed``, so both
    modes replay identically for a given seed.
    """
    if model.spec.n_actions != env.n_actions:
        raise ConfigError(
            f"model has {model.spec.n_actions} actions but environment has {env.n_actions}"
        )
    if policy_mode not in ("greedy", "sample"):
        raise ConfigError(f"policy_mode must be 'greedy' or 'sample', got {policy_mode!r}")
    action_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    rollout = Rollout(
        meta=RolloutMeta(model.meta, getattr(env, "env_id", "unknown"), seed, policy_mode),
        traces=[] if capture_activations else None,
    )
    frame, ram = env.reset(seed)
    stacker = FrameStacker()
    obs = stacker.push(grayscale_downsample(frame))
    score = 0.0
    for _ in range(max_steps):
        trace = forward_with_trace(model, obs)
        if policy_mode == "greedy":
            action = trace.chosen_action
        else:
            probs = softmax(trace.head_q.astype(np.float64))
            action = int(action_rng.choice(model.spec.n_actions, p=probs / probs.sum()))
        next_frame, next_ram, reward, done = env.step(action)
        score += reward
        rollout.steps.append(
            StepRecord(frame=frame, obs=obs, ram=ram, action=action, reward=float(reward), score=score, done=bool(done))
        )
        if capture_activations:
            rollout.traces.append(trace)
        if done:
            break
        frame, ram = next_frame, next_ram
        obs = stacker.push(grayscale_downsample(frame))
    return rollout


_TRACE_LAYERS = ("fc", "head_raw", "head_q")


def save_rollout(rollout: Rollout, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n = len(rollout.steps)
    checksums: dict[str, int] = {}

    def write(name: str, payload: bytes) -> None:
        (d / name).write_bytes(payload)
        checksums[name] = zlib.crc32(payload)

    write("frames.bin", b"".join(s.frame.tobytes() for s in rollout.steps))
    write("obs.bin", b"".join(np.ascontiguousarray(s.obs, dtype="<f4").tobytes() for s in rollout.steps))
    write("ram.bin", b"".join(s.ram.tobytes() for s in rollout.steps))
    steps = {
        "actions": [s.action for s in rollout.steps],
        "rewards": [s.reward for s in rollout.steps],
        "scores": [s.score for s in rollout.steps],
        "dones": [s.done for s in rollout.steps],
    }
    write(STEPS_NAME, json.dumps(steps).encode("utf-8"))

    act_layers: list[str] = []
    act_shapes: dict[str, list[int]] = {}
    if rollout.traces is not None and n > 0:
        t0 = rollout.traces[0]
        act_layers = [f"conv{i + 1}" for i in range(len(t0.convs))] + list(_TRACE_LAYERS)
        for layer in act_layers:
            arrs = [tr.layer(layer) for tr in rollout.traces]
            act_shapes[layer] = list(arrs[0].shape)
            write(f"act_{layer}.bin", b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrs))
        values = np.array(
            [np.nan if tr.value is None else tr.value for tr in rollout.traces], dtype="<f4"
        )
        write("act_value.bin", values.tobytes())

    manifest = {
        "format": "rollout-v1",
        "n_steps": n,
        "env_id": rollout.meta.env_id,
        "seed": rollout.meta.seed,
        "policy_mode": rollout.meta.policy_mode,
        "model_meta": _meta_to_json(rollout.meta.model_meta),
        "streams": ["frames", "obs", "ram"],
        "activation_layers": act_layers,
        "activation_shapes": act_shapes,
        "checksums": checksums,
    }
    (d / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def _read_stream(d: Path, name: str, dtype, per_step: int, n: int, checksums: dict | None = None) -> np.ndarray:
    path = d / name
    if not path.exists():
        raise MissingStreamError(f"{d}: stream file {name} is missing")
    payload = path.read_bytes()
    raw = np.frombuffer(payload, dtype=dtype)
    if raw.size != per_step * n:
        raise StreamLengthError(
            f"{d}/{name}: holds {raw.size // max(per_step, 1)} steps, manifest declares {n}"
        )
    if checksums and name in checksums and zlib.crc32(payload) != checksums[name]:
        raise ChecksumMismatchError(f"{d}/{name}: stream checksum mismatch")
    return raw


def load_rollout(directory: str | Path) -> Rollout:
    d = Path(directory)
    mpath = d / MANIFEST_NAME
    if not mpath.exists():
        raise MissingStreamError(f"{d}: no {MANIFEST_NAME}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    n = int(manifest["n_steps"])
    checksums = manifest.get("checksums", {})

    frames = _read_stream(d, "frames.bin", np.uint8, FRAME_HEIGHT * FRAME_WIDTH * 3, n, checksums).reshape(
        n, FRAME_HEIGHT, FRAME_WIDTH, 3
    )
    obs = _read_stream(d, "obs.bin", "<f4", OBS_STACK * OBS_SIZE * OBS_SIZE, n, checksums).reshape(
        n, OBS_STACK, OBS_SIZE, OBS_SIZE
    )
    ram = _read_stream(d, "ram.bin", np.uint8, 128, n, checksums).reshape(n, 128)
    spath = d / STEPS_NAME
    if not spath.exists():
        raise MissingStreamError(f"{d}: no {STEPS_NAME}")
    steps_raw = spath.read_bytes()
    if STEPS_NAME in checksums and zlib.crc32(steps_raw) != checksums[STEPS_NAME]:
        raise ChecksumMismatchError(f"{d}/{STEPS_NAME}: stream checksum mismatch")
    cols = json.loads(steps_raw.decode("utf-8"))
    for key in ("actions", "rewards", "scores", "dones"):
        if len(cols[key]) != n:
            raise StreamLengthError(f"{d}: steps.json column {key} has {len(cols[key])} entries, expected {n}")

    meta = RolloutMeta(
        model_meta=_meta_from_json(manifest["model_meta"]),
        env_id=manifest["env_id"],
        seed=int(manifest["seed"]),
        policy_mode=manifest["policy_mode"],
    )
    steps = [
        StepRecord(
            frame=np.ascontiguousarray(frames[i]),
            obs=np.ascontiguousarray(obs[i], dtype=np.float32),
            ram=np.ascontiguousarray(ram[i]),
            action=int(cols["actions"][i]),
            reward=float(cols["rewards"][i]),
            score=float(cols["scores"][i]),
            done=bool(cols["dones"][i]),
        )
        for i in range(n)
    ]

    traces = None
    layers = manifest.get("activation_layers") or []
    if layers:
        arrays = {}
        for layer in layers:
            shape = tuple(manifest["activation_shapes"][layer])
            per = int(np.prod(shape))
            arrays[layer] = _read_stream(d, f"act_{layer}.bin", "<f4", per, n, checksums).reshape(n, *shape)
        values = _read_stream(d, "act_value.bin", "<f4", 1, n, checksums)
        conv_names = [l for l in layers if l.startswith("conv")]
        traces = []
        for i in range(n):
            q = np.ascontiguousarray(arrays["head_q"][i], dtype=np.float32)
            traces.append(
                ActivationTrace(
                    convs=tuple(np.ascontiguousarray(arrays[c][i], np.float32) for c in conv_names),
                    fc=np.ascontiguousarray(arrays["fc"][i], np.float32),
                    head_raw=np.ascontiguousarray(arrays["head_raw"][i], np.float32),
                    head_q=q,
                    chosen_action=int(np.argmax(q)),
                    value=None if np.isnan(values[i]) else float(values[i]),
                )
            )
    return Rollout(meta=meta, steps=steps, traces=traces)


def rollouts_equal(a: Rollout, b: Rollout) -> bool:
    """Bit-exact equality of two rollouts (metadata, steps and traces)."""
    if (a.meta.env_id, a.meta.seed, a.meta.policy_mode) != (b.meta.env_id, b.meta.seed, b.meta.policy_mode):
        return False
    if a.meta.model_meta != b.meta.model_meta or len(a) != len(b):
        return False
    for sa, sb in zip(a.steps, b.steps):
        if (sa.action, sa.reward, sa.score, sa.done) != (sb.action, sb.reward, sb.score, sb.done):
            return False
        if not (
            np.array_equal(sa.frame, sb.frame)
            and np.array_equal(sa.obs, sb.obs)
            and np.array_equal(sa.ram, sb.ram)
        ):
            return False
    if (a.traces is None) != (b.traces is None):
        return False
    if a.traces is not None:
        for ta, tb in zip(a.traces, b.traces):
            if len(ta.convs) != len(tb.convs) or ta.chosen_action != tb.chosen_action:
                return False
            pairs = list(zip(ta.convs, tb.convs)) + [
                (ta.fc, tb.fc),
                (ta.head_raw, tb.head_raw),
                (ta.head_q, tb.head_q),
            ]
            if not all(np.array_equal(x, y) for x, y in pairs):
                return False
            if (ta.value is None) != (tb.value is None):
                return False
            if ta.value is not None and not np.isclose(ta.value, tb.value, rtol=0, atol=1e-6):
                return False
    return True

import inspect

import numpy as np
import pytest

from policyscope.env import CatchEnv
from policyscope.errors import ConfigError, MissingStreamError, StreamLengthError
from policyscope.model_io import ModelMeta, random_model
from policyscope.network import default_spec
from policyscope.rollout import (
    DEFAULT_MAX_STEPS,
    load_rollout,
    record_rollout,
    rollouts_equal,
    save_rollout,
)


@pytest.fixture(scope="module")
def toy_model():
    return random_model(default_spec(4), ModelMeta(algorithm="DQN", run_id="r1"), seed=0)


def test_default_max_steps_is_2500():
    sig = inspect.signature(record_rollout)
    assert sig.parameters["max_steps"].default == 2500 == DEFAULT_MAX_STEPS


def test_zero_steps_gives_empty_rollout(toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=50), max_steps=0, seed=1)
    assert len(r) == 0


def test_greedy_rollout_deterministic(toy_model):
    a = record_rollout(toy_model, CatchEnv(horizon=40), max_steps=40, seed=3, capture_activations=True)
    b = record_rollout(toy_model, CatchEnv(horizon=40), max_steps=40, seed=3, capture_activations=True)
    assert rollouts_equal(a, b)


def test_sampling_mode_deterministic_and_distinct(toy_model):
    a = record_rollout(toy_model, CatchEnv(horizon=40), max_steps=40, seed=3, policy_mode="sample")
    b = record_rollout(toy_model, CatchEnv(horizon=40), max_steps=40, seed=3, policy_mode="sample")
    assert rollouts_equal(a, b)
    c = record_rollout(toy_model, CatchEnv(horizon=40), max_steps=40, seed=4, policy_mode="sample")
    assert not rollouts_equal(a, c)


def test_rollout_stops_at_done(toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=25), max_steps=100, seed=0)
    assert len(r) == 25
    assert r.steps[-1].done
    assert not any(s.done for s in r.steps[:-1])


def test_score_is_prefix_sum(toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=60), max_steps=60, seed=5)
    acc = 0.0
    for s in r.steps:
        acc += s.reward
        assert s.score == acc


def test_action_count_mismatch(toy_model):
    model3 = random_model(default_spec(3), seed=0)
    with pytest.raises(ConfigError):
        record_rollout(model3, CatchEnv(), max_steps=5)


def test_roundtrip_without_traces(tmp_path, toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=10), max_steps=10, seed=6)
    save_rollout(r, tmp_path / "ro")
    loaded = load_rollout(tmp_path / "ro")
    assert rollouts_equal(r, loaded)
    assert loaded.traces is None


def test_roundtrip_with_traces(tmp_path, toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=10), max_steps=10, seed=7, capture_activations=True)
    save_rollout(r, tmp_path / "ro")
    loaded = load_rollout(tmp_path / "ro")
    assert rollouts_equal(r, loaded)
    assert loaded.traces is not None and len(loaded.traces) == len(r)


def test_manifest_step_count_mismatch(tmp_path, toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=10), max_steps=10, seed=8)
    save_rollout(r, tmp_path / "ro")
    frames = tmp_path / "ro" / "frames.bin"
    raw = frames.read_bytes()
    frames.write_bytes(raw[: len(raw) - 210 * 160 * 3])  # drop one frame
    with pytest.raises(StreamLengthError):
        load_rollout(tmp_path / "ro")


def test_single_byte_stream_corruption_detected(tmp_path, toy_model, rng):
    from policyscope.errors import ChecksumMismatchError

    r = record_rollout(toy_model, CatchEnv(horizon=8), max_steps=8, seed=11)
    save_rollout(r, tmp_path / "ro")
    target = tmp_path / "ro" / "obs.bin"
    raw = bytearray(target.read_bytes())
    raw[int(rng.integers(0, len(raw)))] ^= 0x40
    target.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatchError):
        load_rollout(tmp_path / "ro")


def test_missing_stream_file(tmp_path, toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=5), max_steps=5, seed=9)
    save_rollout(r, tmp_path / "ro")
    (tmp_path / "ro" / "ram.bin").unlink()
    with pytest.raises(MissingStreamError):
        load_rollout(tmp_path / "ro")


def test_observation_range_and_stacking(toy_model):
    r = record_rollout(toy_model, CatchEnv(horizon=6), max_steps=6, seed=10)
    obs = r.observations()
    assert obs.min() >= 0.0 and obs.max() <= 1.0
    # first step: history has one frame, so all four channels repeat it
    first = r.steps[0].obs
    for ch in range(3):
        np.testing.assert_array_equal(first[ch], first[3])

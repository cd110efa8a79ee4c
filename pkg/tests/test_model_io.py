import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from policyscope.errors import (
    BadMagicError,
    ChecksumMismatchError,
    SpecInconsistencyError,
    TruncatedBlobError,
    UnsupportedVersionError,
)
from policyscope.model_io import (
    CheckpointTag,
    FrozenModel,
    ModelMeta,
    load_model,
    random_model,
    save_model,
    validate_model,
)
from policyscope.network import C51Params, HeadKind, NetworkSpec, default_spec

from conftest import tiny_spec


def _models_equal(a: FrozenModel, b: FrozenModel) -> bool:
    if a.spec != b.spec or a.meta != b.meta:
        return False
    if set(a.tensors) != set(b.tensors):
        return False
    return all(a.tensors[k].tobytes() == b.tensors[k].tobytes() for k in a.tensors)


@pytest.mark.parametrize("head", list(HeadKind))
def test_roundtrip_bit_exact(head, tmp_path, default_meta):
    c51 = C51Params() if head is HeadKind.C51 else None
    model = random_model(default_spec(6, head, c51), default_meta, seed=1)
    path = tmp_path / "m.azm"
    save_model(model, path)
    loaded = load_model(path)
    assert _models_equal(model, loaded)


@settings(max_examples=12, deadline=None)
@given(
    n_actions=st.integers(1, 9),
    fc_width=st.integers(1, 17),
    head=st.sampled_from(list(HeadKind)),
    seed=st.integers(0, 2**20),
)
def test_roundtrip_randomized_specs(n_actions, fc_width, head, seed, tmp_path_factory):
    spec = NetworkSpec(
        n_actions=n_actions,
        head=head,
        conv_layers=((2, 3, 2), (3, 2, 1)),
        fc_width=fc_width,
        c51=C51Params(n_atoms=7, v_min=-1, v_max=3) if head is HeadKind.C51 else None,
        in_channels=4,
        input_hw=(8, 8),
    )
    model = random_model(spec, seed=seed)
    path = tmp_path_factory.mktemp("rt") / "m.azm"
    save_model(model, path)
    assert _models_equal(model, load_model(path))


def test_corrupted_trailing_checksum(tmp_path):
    model = random_model(tiny_spec(), seed=2)
    path = tmp_path / "m.azm"
    save_model(model, path)
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatchError):
        load_model(path)


def test_any_single_byte_blob_corruption_detected(tmp_path, rng):
    model = random_model(tiny_spec(), seed=3)
    path = tmp_path / "m.azm"
    save_model(model, path)
    raw = path.read_bytes()
    header_len = struct.unpack_from("<I", raw, 8)[0]
    blob_start = 12 + header_len
    blob_end = len(raw) - 4
    for _ in range(20):
        pos = int(rng.integers(blob_start, blob_end))
        corrupted = bytearray(raw)
        corrupted[pos] ^= 1 + int(rng.integers(0, 255))
        path.write_bytes(bytes(corrupted))
        with pytest.raises(ChecksumMismatchError):
            load_model(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "m.azm"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(BadMagicError):
        load_model(path)


def test_unsupported_version(tmp_path):
    model = random_model(tiny_spec(), seed=4)
    path = tmp_path / "m.azm"
    save_model(model, path)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 4, 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersionError):
        load_model(path)


def test_truncated_blob(tmp_path):
    model = random_model(tiny_spec(), seed=5)
    path = tmp_path / "m.azm"
    save_model(model, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 40])
    with pytest.raises(TruncatedBlobError):
        load_model(path)


def _rewrite_header(raw: bytes, mutate) -> bytes:
    header_len = struct.unpack_from("<I", raw, 8)[0]
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    mutate(header)
    new_header = json.dumps(header).encode("utf-8")
    return raw[:8] + struct.pack("<I", len(new_header)) + new_header + raw[12 + header_len :]


def test_c51_head_without_params_is_inconsistent(tmp_path):
    model = random_model(default_spec(4, HeadKind.C51, C51Params(n_atoms=3)), seed=6)
    path = tmp_path / "m.azm"
    save_model(model, path)

    def drop_c51(header):
        header["spec"]["c51"] = None

    path.write_bytes(_rewrite_header(path.read_bytes(), drop_c51))
    with pytest.raises(SpecInconsistencyError):
        load_model(path)


def test_directory_spec_mismatch(tmp_path):
    model = random_model(tiny_spec(), seed=7)
    path = tmp_path / "m.azm"
    save_model(model, path)

    def grow_conv1(header):
        header["tensors"][0]["shape"][0] += 1

    path.write_bytes(_rewrite_header(path.read_bytes(), grow_conv1))
    with pytest.raises(SpecInconsistencyError):
        load_model(path)


def test_validate_model_clean():
    assert validate_model(random_model(tiny_spec(), seed=8)) == []


def test_validate_model_wrong_shape():
    model = random_model(tiny_spec(), seed=9)
    model.tensors["conv1.w"] = model.tensors["conv1.w"][:2]
    violations = validate_model(model)
    assert len(violations) == 1
    assert violations[0].tensor == "conv1.w"
    assert violations[0].kind == "shape"


def test_validate_model_missing_tensor():
    model = random_model(tiny_spec(), seed=10)
    del model.tensors["fc.b"]
    violations = validate_model(model)
    assert [(v.tensor, v.kind) for v in violations] == [("fc.b", "missing")]


def test_validate_model_extra_tensor():
    model = random_model(tiny_spec(), seed=11)
    model.tensors["bonus"] = np.zeros(3, np.float32)
    assert [(v.tensor, v.kind) for v in validate_model(model)] == [("bonus", "extra")]


def test_save_rejects_invalid(tmp_path):
    model = random_model(tiny_spec(), seed=12)
    del model.tensors["fc.b"]
    with pytest.raises(SpecInconsistencyError):
        save_model(model, tmp_path / "m.azm")


def test_save_rejects_float64(tmp_path):
    model = random_model(tiny_spec(), seed=13, dtype=np.float64)
    with pytest.raises(SpecInconsistencyError):
        save_model(model, tmp_path / "m.azm")


def test_checkpoint_tags():
    assert CheckpointTag.parse("hours:4").hours == 4
    assert CheckpointTag.parse("frames:400000000").frames == 400_000_000
    assert CheckpointTag.parse("human_level").criterion == "human_level"
    with pytest.raises(Exception):
        CheckpointTag("hours", hours=3)
    with pytest.raises(Exception):
        ModelMeta(algorithm="NotAThing")

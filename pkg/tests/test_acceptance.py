"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. Headline numbers from
trained game models are out of desk-scale reach, so every criterion here is
property- or oracle-based on the toy environment and synthetic fixtures.
"""

import inspect
import struct
import time

import numpy as np
import pytest

from policyscope.distinguisher import (
    FrameClassifier,
    build_dataset,
    evaluate,
    f1_score,
    train_classifier,
)
from policyscope.dreamer import DreamConfig, synthesize, total_variation
from policyscope.embedding.pca import PCA
from policyscope.embedding.tsne import (
    TSNE,
    conditional_gaussians,
    pairwise_sq_dists,
    row_perplexities,
)
from policyscope.env import CatchEnv
from policyscope.errors import ChecksumMismatchError
from policyscope.filters import present_bias
from policyscope.model_io import ModelMeta, load_model, random_model, save_model
from policyscope.network import (
    C51Params,
    HeadKind,
    NetworkSpec,
    Objective,
    default_spec,
    forward_with_trace,
    input_gradient,
    objective_value,
)
from policyscope.patches import conv_maps, receptive_field, top_patches
from policyscope.robustness import (
    ALGORITHM_BEST,
    SweepCurve,
    eval_score,
    normalize_curves,
    observation_noise_sweep,
)
from policyscope.rollout import (
    Rollout,
    RolloutMeta,
    StepRecord,
    load_rollout,
    record_rollout,
    rollouts_equal,
    save_rollout,
)
from policyscope.training import FeedForwardNet, param_gradient

from conftest import fd_gradient, max_rel_error, texture_rollout, tiny_model

SMALL84 = NetworkSpec(n_actions=4, conv_layers=((8, 8, 4), (8, 4, 2), (8, 3, 1)), fc_width=32)


def test_gradient_suite():
    """100 random (net, input, objective) cases: input gradients match
    central finite differences to <1e-3 relative error; parameter gradients
    checked on interleaved classifier cases; all inside 60 s."""
    start = time.monotonic()
    heads = list(HeadKind)
    worst_input = 0.0
    worst_param = 0.0
    for case in range(100):
        rng = np.random.Generator(np.random.PCG64(1000 + case))
        head = heads[case % 4]
        model = tiny_model(head, seed=case, dtype=np.float64)
        obs = rng.uniform(0.05, 0.95, size=(4, 9, 9))
        objective = [
            Objective("output", unit=case % 3),
            Objective("fc", unit=case % 8),
            Objective("conv2", channel=case % 4),
            Objective("conv1", unit=(case % 3, case % 4, case % 4)),
        ][(case // 4) % 4]
        analytic = input_gradient(model, obs, objective)
        fd = fd_gradient(lambda x: objective_value(model, x, objective), obs.copy(), h=1e-5)
        worst_input = max(worst_input, max_rel_error(analytic, fd))
        assert worst_input < 1e-3, f"case {case}: input-gradient error {worst_input}"

        if case % 4 == 0:
            net = FeedForwardNet.initialize((2, 7, 7), [(3, 3, 2)], (5, 3), seed=case, dtype=np.float64)
            xb = rng.uniform(0, 1, size=(3, 2, 7, 7))
            yb = rng.integers(0, 3, size=3)
            _loss, grads = param_gradient(net, xb, yb)
            for name in ("conv1.w", "fc1.w", "fc2.b"):
                flat = net.params[name].reshape(-1)
                idx = rng.choice(flat.size, size=min(6, flat.size), replace=False)
                fdv = np.zeros(len(idx))
                h = 1e-5
                for j, i in enumerate(idx):
                    orig = flat[i]
                    flat[i] = orig + h
                    lp, _ = param_gradient(net, xb, yb)
                    flat[i] = orig - h
                    lm, _ = param_gradient(net, xb, yb)
                    flat[i] = orig
                    fdv[j] = (lp - lm) / (2 * h)
                worst_param = max(worst_param, max_rel_error(grads[name].reshape(-1)[idx], fdv))
                assert worst_param < 1e-3, f"case {case}: param-gradient error {worst_param} at {name}"
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"
    print(
        f"\nPASS: gradient suite (100 cases; worst input {worst_input:.2e}, "
        f"worst param {worst_param:.2e}, {elapsed:.1f}s < 60s)"
    )


def test_shape_and_receptive_field_suite():
    """Default spec gives the 20/9/7 conv chain; receptive fields (8,4),
    (20,8), (36,8), each confirmed by the pixel-perturbation oracle."""
    spec = default_spec(4)
    assert [h for _c, h, _w in spec.conv_shapes()] == [20, 9, 7]
    expected = {1: (8, 4), 2: (20, 8), 3: (36, 8)}
    for layer, (size, jump) in expected.items():
        rf = receptive_field(spec, layer)
        assert (rf.size, rf.jump) == (size, jump)

    # Perturbation oracle on a strictly monotone (all-positive) network.
    model = random_model(SMALL84, seed=0)
    for name, t in model.tensors.items():
        model.tensors[name] = (np.abs(t) + 0.01).astype(np.float32)
    obs = np.full((4, 84, 84), 0.25, dtype=np.float32)
    rng = np.random.Generator(np.random.PCG64(7))
    checked = 0
    for layer in (1, 2, 3):
        rf = receptive_field(model.spec, layer)
        _c, hh, ww = model.spec.conv_shapes()[layer - 1]
        base_map = conv_maps(model, obs[None], layer)[0, 0]
        for _ in range(7):
            x, y = int(rng.integers(0, ww)), int(rng.integers(0, hh))
            x0, y0 = rf.top_left(x, y)
            base = base_map[y, x]
            batch = np.repeat(obs[None], 84, axis=0)
            for r in range(84):
                batch[r, :, r, :] += 0.3
            vals = np.concatenate(
                [conv_maps(model, batch[i : i + 42], layer)[:, 0, y, x] for i in (0, 42)]
            )
            rows = [r for r in range(84) if abs(vals[r] - base) > 1e-5]
            assert rows == list(range(y0, min(y0 + rf.size, 84))), (layer, x, y)
            batch = np.repeat(obs[None], 84, axis=0)
            for c in range(84):
                batch[c, :, :, c] += 0.3
            vals = np.concatenate(
                [conv_maps(model, batch[i : i + 42], layer)[:, 0, y, x] for i in (0, 42)]
            )
            cols = [c for c in range(84) if abs(vals[c] - base) > 1e-5]
            assert cols == list(range(x0, min(x0 + rf.size, 84))), (layer, x, y)
            checked += 1
    print(f"\nPASS: shape/receptive-field suite (chain 20/9/7; {checked} units perturbation-confirmed)")


def test_temporal_bias_calibration():
    """100 seeded random-normal first layers sit in [0.95, 1.05]; weights on
    the present frame only give exactly 0."""
    # The statistic concentrates near 1 with ~2% spread at this filter count,
    # so any fixed 100-draw family sits inside the band barring a tail draw;
    # the seed family here is fixed and documented.
    spec = default_spec(4)
    base = random_model(spec, seed=0)
    biases = []
    for seed in range(100):
        rng = np.random.Generator(np.random.PCG64([0, seed]))
        base.tensors["conv1.w"] = rng.normal(size=(32, 4, 8, 8)).astype(np.float32)
        biases.append(present_bias(base))
    biases = np.array(biases)
    assert biases.min() >= 0.95 and biases.max() <= 1.05

    w = np.zeros((32, 4, 8, 8), np.float32)
    w[:, 3] = 1.0
    base.tensors["conv1.w"] = w
    assert present_bias(base) == 0.0
    print(
        f"\nPASS: temporal-bias calibration (100 draws in [{biases.min():.3f}, {biases.max():.3f}] "
        "⊂ [0.95, 1.05]; present-only = 0 exactly)"
    )


def test_robustness_harness():
    """sigma=0 sweep point equals the noiseless baseline exactly; baselines
    normalize to 1.0 and random play to 0.0; a below-random curve is
    excluded with a record."""
    model = random_model(SMALL84, seed=1)
    factory = lambda: CatchEnv(horizon=80)
    baseline = eval_score(model, factory, episodes=2, seed=3)
    curve = observation_noise_sweep(model, factory, sigmas=(0.0, 0.35), episodes=2, seed=3)
    assert curve.mean_scores[0] == baseline  # exact, not approximate

    curves = [
        SweepCurve("strong", (0.0, 0.1, 0.2), (10.0, 6.0, 2.0), (0.0,) * 3, 3, 0),
        SweepCurve("weak", (0.0, 0.1, 0.2), (1.5, 1.0, 0.5), (0.0,) * 3, 3, 0),
    ]
    norm = normalize_curves(curves, random_baseline=2.0, mode=ALGORITHM_BEST)
    assert norm.values[0][0] == 1.0  # own baseline -> 1
    assert norm.values[0][2] == 0.0  # random-play score -> 0
    assert norm.labels == ["strong"]
    assert len(norm.exclusions) == 1 and norm.exclusions[0]["label"] == "weak"
    print(
        f"\nPASS: robustness harness (sigma=0 == baseline {baseline}; anchors 1.0/0.0; "
        "below-random curve excluded)"
    )


def test_distinguisher_criterion():
    """Texture classes reach F1 >= 0.95 within 20 epochs; shuffled labels
    sit at chance; confusion rows sum to test counts; F1 hand value 0.48."""
    ra = texture_rollout("A2C", "r0", 250, "stripes", 0)
    rb = texture_rollout("ES", "r0", 250, "checker", 1)
    ds = build_dataset([ra, rb], frames_per_model=250, seed=0)
    clf = train_classifier(ds, max_epochs=20, patience=5, seed=0)
    cm, _f1s, mean_f1 = evaluate(clf, ds)
    assert mean_f1 >= 0.95
    per_class_test = [(ds.labels[ds.test_idx] == c).sum() for c in range(2)]
    assert cm.row_sums().tolist() == per_class_test

    rng = np.random.Generator(np.random.PCG64(2))
    y = rng.permutation(ds.labels)
    shuf = FrameClassifier(max_epochs=12, patience=3, random_state=0)
    shuf.fit(ds.frames[ds.train_idx], y[ds.train_idx], ds.frames[ds.val_idx], y[ds.val_idx])
    acc = (shuf.predict(ds.frames[ds.test_idx]) == y[ds.test_idx]).mean()
    assert abs(acc - 0.5) <= 0.1

    assert f1_score(0.6, 0.4) == pytest.approx(0.48)
    assert f1_score(1.0, 1.0) == 1.0
    print(
        f"\nPASS: distinguisher (texture F1 {mean_f1:.3f} >= 0.95; shuffled acc {acc:.3f} within "
        "0.1 of chance; row sums OK; F1(0.6,0.4)=0.48)"
    )


def test_embedding_criterion():
    """PCA basis orthonormal and variance-ordered against the eigen oracle;
    per-point perplexity within 1e-3 of 30; three-cluster purity >= 0.9;
    full N=300 x 3000-iteration run under 5 minutes."""
    start = time.monotonic()
    rng = np.random.Generator(np.random.PCG64(0))
    centers = rng.normal(0, 10.0, size=(3, 50))
    X = np.concatenate([c + rng.normal(0, 1.0, size=(100, 50)) for c in centers])
    labels = np.repeat(np.arange(3), 100)

    pca = PCA(n_components=50).fit(X)
    gram = pca.components_ @ pca.components_.T
    assert np.abs(gram - np.eye(len(gram))).max() < 1e-5
    xc = X - X.mean(axis=0)
    eig = np.sort(np.linalg.eigvalsh(xc.T @ xc / (len(X) - 1)))[::-1]
    np.testing.assert_allclose(pca.explained_variance_, eig[: len(pca.explained_variance_)], atol=1e-6)
    reduced = pca.transform(X)

    p_cond, _ = conditional_gaussians(pairwise_sq_dists(reduced), perplexity=30.0)
    achieved = row_perplexities(p_cond)
    worst = np.abs(achieved - 30.0).max()
    assert worst < 1e-3

    model = TSNE(perplexity=30.0, n_iter=3000, random_state=0)
    emb = model.fit_transform(reduced)
    d2 = pairwise_sq_dists(emb)
    np.fill_diagonal(d2, np.inf)
    nn = np.argsort(d2, axis=1)[:, :10]
    purity = (labels[nn] == labels[:, None]).mean()
    assert purity >= 0.9
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    print(
        f"\nPASS: embedding (orthonormal; variance-ordered; worst perplexity dev {worst:.2e} < 1e-3; "
        f"purity {purity:.3f} >= 0.9; {elapsed:.1f}s < 300s)"
    )


def test_patch_finder_criterion():
    """Top-1 equals the exhaustive global argmax over a 200-step toy
    rollout; a planted template is localized exactly."""
    model = random_model(SMALL84, ModelMeta(algorithm="DQN", run_id="r0"), seed=5)
    rollout = record_rollout(model, CatchEnv(horizon=200), max_steps=200, seed=3)
    assert len(rollout) == 200
    layer, filt = 3, 2
    hits = top_patches(model, rollout, layer, filt, k=1)
    best = None
    for step, rec in enumerate(rollout.steps):
        amap = forward_with_trace(model, rec.obs).convs[layer - 1][filt]
        yx = np.unravel_index(int(np.argmax(amap)), amap.shape)
        cand = (-float(amap[yx]), step, int(yx[0]), int(yx[1]))
        best = cand if best is None or cand < best else best
    assert (-hits[0].activation, hits[0].step, hits[0].y, hits[0].x) == best

    rng = np.random.Generator(np.random.PCG64(8))
    template = rng.uniform(0.5, 1.0, size=(8, 8)).astype(np.float32)
    planted = random_model(SMALL84, seed=7)
    w = np.zeros_like(planted.tensors["conv1.w"])
    w[0, 3] = template
    planted.tensors["conv1.w"] = w
    planted.tensors["conv1.b"] = np.zeros_like(planted.tensors["conv1.b"])
    steps = []
    for step in range(5):
        obs = np.zeros((4, 84, 84), np.float32)
        if step == 2:
            obs[3, 20:28, 36:44] = template
        steps.append(StepRecord(np.zeros((210, 160, 3), np.uint8), obs, np.zeros(128, np.uint8), 0, 0.0, 0.0, False))
    fixture = Rollout(RolloutMeta(ModelMeta(), "synthetic", 0, "greedy"), steps)
    top = top_patches(planted, fixture, 1, 0, k=1)[0]
    assert (top.step, top.x, top.y, top.rect) == (2, 9, 5, (36, 20, 44, 28))
    print(
        f"\nPASS: patch finder (top-1 == exhaustive argmax at step {hits[0].step}; "
        "planted template localized)"
    )


def test_dreamer_criterion():
    """Synthesis beats the best of 100 random inputs; TV-regularized output
    has lower TV; pixels stay in [0,1]; bit-deterministic per seed."""
    model = tiny_model(seed=22, dtype=np.float32)
    objective = Objective("conv2", channel=1)
    rng = np.random.Generator(np.random.PCG64(99))
    rand_best = max(
        objective_value(model, rng.uniform(0.4, 0.6, (4, 9, 9)).astype(np.float32), objective)
        for _ in range(100)
    )
    x, hist = synthesize(model, objective, DreamConfig(iterations=200, jitter_max=2, seed=0))
    assert hist[-1] > rand_best
    assert 0.0 <= x.min() and x.max() <= 1.0
    x_reg, _ = synthesize(model, objective, DreamConfig(iterations=200, jitter_max=2, lambda_tv=10.0, seed=0))
    assert total_variation(x_reg) < total_variation(x)
    x2, hist2 = synthesize(model, objective, DreamConfig(iterations=200, jitter_max=2, seed=0))
    assert x.tobytes() == x2.tobytes() and hist == hist2
    print(
        f"\nPASS: dreamer (final {hist[-1]:.3f} > random best {rand_best:.3f}; "
        f"TV {total_variation(x_reg):.1f} < {total_variation(x):.1f}; clipped; deterministic)"
    )


def test_formats_criterion(tmp_path):
    """Frozen models and rollout archives round-trip bit-exact; single-byte
    corruption is detected in both; the rollout default is 2500 steps."""
    model = random_model(default_spec(5, HeadKind.C51, C51Params()), ModelMeta(algorithm="Rainbow"), seed=4)
    mpath = tmp_path / "m.azm"
    save_model(model, mpath)
    loaded = load_model(mpath)
    assert all(loaded.tensors[k].tobytes() == model.tensors[k].tobytes() for k in model.tensors)
    assert loaded.meta == model.meta and loaded.spec == model.spec

    raw = bytearray(mpath.read_bytes())
    header_len = struct.unpack_from("<I", raw, 8)[0]
    raw[12 + header_len + 5] ^= 0x01  # one bit inside the tensor region
    mpath.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatchError):
        load_model(mpath)

    small = random_model(SMALL84, ModelMeta(algorithm="ApeX", run_id="r0"), seed=1)
    rollout = record_rollout(small, CatchEnv(horizon=40), max_steps=40, seed=6, capture_activations=True)
    rdir = tmp_path / "ro"
    save_rollout(rollout, rdir)
    assert rollouts_equal(rollout, load_rollout(rdir))
    obs_bin = rdir / "obs.bin"
    raw = bytearray(obs_bin.read_bytes())
    raw[1234] ^= 0x20
    obs_bin.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatchError):
        load_rollout(rdir)

    assert inspect.signature(record_rollout).parameters["max_steps"].default == 2500
    long_rollout = record_rollout(small, CatchEnv(horizon=2500), seed=0)
    assert len(long_rollout) == 2500
    print(
        "\nPASS: formats (model + rollout round-trip bit-exact; single-byte corruption detected "
        "in both; default rollout length 2500)"
    )

"""Command-line surface for the toolkit.

Exit codes: 0 success, 2 usage error, 3 missing or unreadable path,
4 malformed data or configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import distinguisher, filters, patches, render, robustness, server
from .dreamer import DreamConfig, dream_strip, synthesize
from .embedding import embed_hidden, embed_ram_joint, export_embedding
from .env import CatchEnv
from .errors import PolicyscopeError
from .model_io import (
    CheckpointTag,
    FrozenModel,
    ModelMeta,
    load_model,
    random_model,
    save_model,
    validate_model,
)
from .network import C51Params, HeadKind, NetworkSpec, Objective, forward_with_trace
from .rollout import DEFAULT_MAX_STEPS, load_rollout, record_rollout, save_rollout

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_PATH = 3
EXIT_BAD_DATA = 4


def _load_model(path: str) -> FrozenModel:
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    return load_model(path)


def _load_rollout(path: str):
    if not Path(path).is_dir():
        raise FileNotFoundError(path)
    return load_rollout(path)


def _env_factory(args):
    return lambda: CatchEnv(horizon=args.horizon)


def _safe_label(label: str) -> str:
    return label.replace("/", "_").replace(" ", "_")


def cmd_inspect(args) -> int:
    m = _load_model(args.model)
    spec = m.spec
    print(f"game:        {m.meta.game}")
    print(f"algorithm:   {m.meta.algorithm}")
    print(f"run:         {m.meta.run_id}")
    print(f"checkpoint:  {m.meta.checkpoint.label()}")
    print(f"head:        {spec.head.value}")
    print(f"actions:     {spec.n_actions}")
    chain = " -> ".join(f"{o}x{k}k/s{s}" for o, k, s in spec.conv_layers)
    print(f"conv chain:  {chain} (spatial {'/'.join(str(h) for _c, h, _w in spec.conv_shapes())})")
    print(f"fc width:    {spec.fc_width}")
    n_params = sum(int(np.prod(t.shape)) for t in m.tensors.values())
    print(f"tensors:     {len(m.tensors)} ({n_params} parameters)")
    return EXIT_OK


def cmd_validate(args) -> int:
    m = _load_model(args.model)
    violations = validate_model(m)
    if not violations:
        print("OK")
        return EXIT_OK
    for v in violations:
        print(str(v))
    return EXIT_BAD_DATA


def cmd_init_model(args) -> int:
    head = HeadKind(args.head)
    c51 = C51Params(args.c51_atoms, args.c51_vmin, args.c51_vmax) if head is HeadKind.C51 else None
    spec = NetworkSpec(n_actions=args.n_actions, head=head, c51=c51)
    meta = ModelMeta(
        game=args.game,
        algorithm=args.algorithm,
        run_id=args.run_id,
        checkpoint=CheckpointTag.parse(args.checkpoint),
    )
    save_model(random_model(spec, meta, seed=args.seed), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_rollout(args) -> int:
    m = _load_model(args.model)
    env = CatchEnv(horizon=args.horizon)
    r = record_rollout(
        m, env, max_steps=args.steps, policy_mode=args.mode, seed=args.seed,
        capture_activations=args.capture_activations,
    )
    save_rollout(r, args.out)
    print(f"recorded {len(r)} steps (final score {r.steps[-1].score if r.steps else 0.0}) -> {args.out}")
    return EXIT_OK


def cmd_filters(args) -> int:
    rows = []
    for path in args.models:
        m = _load_model(path)
        rows.append((m.label(), filters.temporal_profile(m), filters.present_bias(m)))
        if args.mosaic_dir:
            Path(args.mosaic_dir).mkdir(parents=True, exist_ok=True)
            out = Path(args.mosaic_dir) / f"{_safe_label(m.label())}.png"
            render.save_png(filters.filter_mosaic(m), out)
    Path(args.out_csv).write_text(filters.profiles_to_csv(rows), encoding="utf-8")
    print(f"wrote {args.out_csv}")
    return EXIT_OK


def cmd_temporal_bias(args) -> int:
    models = [( _load_model(p).label(), _load_model(p)) for p in args.models]
    ranked = filters.rank_by_present_bias(models)
    lines = ["label,bias"] + [f"{label},{bias!r}" for label, bias in ranked]
    text = "\n".join(lines) + "\n"
    if args.out_csv:
        Path(args.out_csv).write_text(text, encoding="utf-8")
        print(f"wrote {args.out_csv}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_robustness(args) -> int:
    env_factory = _env_factory(args)
    sigmas = None
    if args.sigmas:
        sigmas = tuple(float(s) for s in args.sigmas.split(","))
    curves = []
    for path in args.models:
        m = _load_model(path)
        if args.kind == "obs":
            curves.append(robustness.observation_noise_sweep(
                m, env_factory, sigmas or robustness.DEFAULT_OBS_SIGMAS,
                episodes=args.episodes, seed=args.seed))
        else:
            curves.append(robustness.parameter_noise_sweep(
                m, env_factory, sigmas or robustness.DEFAULT_PARAM_SIGMAS,
                episodes=args.episodes, seed=args.seed))
    baseline = robustness.random_play_baseline(env_factory, args.baseline_episodes, args.seed)
    Path(args.out_csv).write_text(robustness.curves_to_csv(curves), encoding="utf-8")
    Path(args.out_json).write_text(robustness.report_json(curves, baseline), encoding="utf-8")
    print(f"wrote {args.out_csv} and {args.out_json} (random baseline {baseline})")
    return EXIT_OK


def cmd_classify(args) -> int:
    rollouts = [_load_rollout(p) for p in args.rollouts]
    ds = distinguisher.build_dataset(rollouts, frames_per_model=args.frames_per_model, seed=args.seed)
    clf = distinguisher.train_classifier(ds, max_epochs=args.epochs, patience=args.patience, seed=args.seed)
    cm, f1s, mean_f1 = distinguisher.evaluate(clf, ds)
    if args.out_csv:
        Path(args.out_csv).write_text(
            distinguisher.confusion_to_csv(cm) + "\n" + distinguisher.f1_to_csv(cm), encoding="utf-8"
        )
    if args.out_json:
        payload = {
            "classes": cm.class_names,
            "confusion": cm.counts.tolist(),
            "per_class_f1": f1s,
            "mean_f1": mean_f1,
            "best_epoch": clf.best_epoch_,
        }
        Path(args.out_json).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    if args.heatmap:
        render.save_png(distinguisher.confusion_heatmap(cm), args.heatmap)
    print(f"mean F1 {mean_f1:.4f} over {len(cm.class_names)} classes")
    return EXIT_OK


def cmd_embed(args) -> int:
    rollouts = [_load_rollout(p) for p in args.rollouts]
    kw = dict(pca_dims=args.pca_dims, perplexity=args.perplexity,
              iterations=args.iterations, seed=args.seed)
    if args.mode == "ram":
        result = embed_ram_joint(rollouts, **kw)
    else:
        model = _load_model(args.model) if args.model else None
        result = embed_hidden(model, rollouts[0], layer=args.layer, **kw)
    out = export_embedding(result, args.out)
    print(f"wrote {out} ({len(result.points)} points, {len(result.series)} series)")
    return EXIT_OK


def cmd_patches(args) -> int:
    m = _load_model(args.model)
    r = _load_rollout(args.rollout)
    hits = patches.top_patches(m, r, layer=args.layer, filter_index=args.filter, k=args.k)
    if args.out_json:
        Path(args.out_json).write_text(patches.hits_to_json(hits), encoding="utf-8")
    if args.sheet:
        render.save_png(patches.contact_sheet(hits, r), args.sheet)
    rf = patches.receptive_field(m.spec, args.layer)
    print(f"conv{args.layer} filter {args.filter}: receptive field {rf.size}px jump {rf.jump}px, {len(hits)} hits")
    return EXIT_OK


def _objective_from_args(args) -> Objective:
    if args.action is not None:
        return Objective(layer="output", unit=args.action)
    if args.unit is not None:
        parts = tuple(int(v) for v in args.unit.split(","))
        if args.layer == "fc":
            return Objective(layer="fc", unit=parts[0])
        return Objective(layer=args.layer, unit=parts)
    if args.channel is not None:
        return Objective(layer=args.layer, channel=args.channel)
    raise PolicyscopeError("specify --channel, --unit or --action for the objective")


def cmd_dream(args) -> int:
    m = _load_model(args.model)
    objective = _objective_from_args(args)
    config = DreamConfig(
        iterations=args.iterations, step_size=args.step_size, jitter_max=args.jitter,
        lambda_tv=args.lambda_tv, lambda_l1=args.lambda_l1, seed=args.seed,
        optimizer=args.optimizer,
    )
    x, history = synthesize(m, objective, config)
    render.save_png(dream_strip(x), args.out)
    if args.history_csv:
        text = "iteration,objective\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(history))
        Path(args.history_csv).write_text(text, encoding="utf-8")
    print(f"objective {history[0]:.5f} -> {history[-1]:.5f}; wrote {args.out}")
    return EXIT_OK


def cmd_render_trace(args) -> int:
    m = _load_model(args.model) if args.model else None
    r = _load_rollout(args.rollout)
    if r.traces is None:
        if m is None:
            raise PolicyscopeError("rollout has no captured activations; pass --model to recompute")
        r.traces = [forward_with_trace(m, s.obs) for s in r.steps]
    ranges = render.compute_activation_ranges(r.traces)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stop = len(r.steps) if args.count is None else min(len(r.steps), args.start + args.count)
    for i in range(args.start, stop):
        img = render.render_trace_frame(r.steps[i], r.traces[i], ranges)
        render.save_png(img, out / f"trace_{i:05d}.png")
    print(f"wrote {stop - args.start} frames to {out}")
    print("assemble externally, e.g.: ffmpeg -i trace_%05d.png -r 30 trace.mp4")
    return EXIT_OK


def cmd_render_grid(args) -> int:
    rollouts = [_load_rollout(p) for p in args.rollouts]
    algorithms = sorted({r.meta.model_meta.algorithm for r in rollouts})
    runs = sorted({r.meta.model_meta.run_id for r in rollouts})
    index = {(r.meta.model_meta.run_id, r.meta.model_meta.algorithm): r for r in rollouts}
    try:
        matrix = [[index[(run, alg)] for alg in algorithms] for run in runs]
    except KeyError as e:
        raise PolicyscopeError(f"missing rollout for (run, algorithm) cell {e}") from e
    render.save_png(render.render_rollout_grid(matrix, args.step), args.out)
    print(f"wrote {args.out} ({len(runs)}x{len(algorithms)} grid at step {args.step})")
    return EXIT_OK


def cmd_serve(args) -> int:
    server.serve(args.dir, args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="policyscope",
                                description="Introspection toolkit for frozen policy networks.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("inspect", help="print model metadata and architecture")
    sp.add_argument("model")
    sp.set_defaults(fn=cmd_inspect)

    sp = sub.add_parser("validate", help="check a frozen model against its spec")
    sp.add_argument("model")
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("init-model", help="write a randomly initialized frozen model")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-actions", type=int, default=4)
    sp.add_argument("--head", choices=[h.value for h in HeadKind], default="q")
    sp.add_argument("--game", default="toy-catch")
    sp.add_argument("--algorithm", default="Other")
    sp.add_argument("--run-id", default="r0")
    sp.add_argument("--checkpoint", default="final")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--c51-atoms", type=int, default=51)
    sp.add_argument("--c51-vmin", type=float, default=-10.0)
    sp.add_argument("--c51-vmax", type=float, default=10.0)
    sp.set_defaults(fn=cmd_init_model)

    sp = sub.add_parser("rollout", help="record a cached rollout in the toy environment")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--steps", type=int, default=DEFAULT_MAX_STEPS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=["greedy", "sample"], default="greedy")
    sp.add_argument("--horizon", type=int, default=500)
    sp.add_argument("--capture-activations", action="store_true")
    sp.set_defaults(fn=cmd_rollout)

    sp = sub.add_parser("filters", help="temporal profiles as CSV plus filter mosaics")
    sp.add_argument("models", nargs="+")
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--mosaic-dir")
    sp.set_defaults(fn=cmd_filters)

    sp = sub.add_parser("temporal-bias", help="rank models by present bias")
    sp.add_argument("models", nargs="+")
    sp.add_argument("--out-csv")
    sp.set_defaults(fn=cmd_temporal_bias)

    sp = sub.add_parser("robustness", help="noise degradation sweeps")
    sp.add_argument("models", nargs="+")
    sp.add_argument("--kind", choices=["obs", "param"], default="obs")
    sp.add_argument("--sigmas", help="comma-separated schedule starting at 0")
    sp.add_argument("--episodes", type=int, default=5)
    sp.add_argument("--baseline-episodes", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=int, default=300)
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--out-json", required=True)
    sp.set_defaults(fn=cmd_robustness)

    sp = sub.add_parser("classify", help="train the algorithm distinguisher on rollouts")
    sp.add_argument("rollouts", nargs="+")
    sp.add_argument("--frames-per-model", type=int, default=distinguisher.DEFAULT_FRAMES_PER_MODEL)
    sp.add_argument("--epochs", type=int, default=40)
    sp.add_argument("--patience", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-json")
    sp.add_argument("--out-csv")
    sp.add_argument("--heatmap")
    sp.set_defaults(fn=cmd_classify)

    sp = sub.add_parser("embed", help="PCA + t-SNE embedding, exported for the explorer")
    sp.add_argument("rollouts", nargs="+")
    sp.add_argument("--mode", choices=["ram", "hidden"], default="ram")
    sp.add_argument("--model", help="needed for --mode hidden without cached activations")
    sp.add_argument("--layer", default="fc")
    sp.add_argument("--out", required=True)
    sp.add_argument("--pca-dims", type=int, default=50)
    sp.add_argument("--perplexity", type=float, default=30.0)
    sp.add_argument("--iterations", type=int, default=3000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_embed)

    sp = sub.add_parser("patches", help="maximally activating image patches for one filter")
    sp.add_argument("--model", required=True)
    sp.add_argument("--rollout", required=True)
    sp.add_argument("--layer", type=int, default=3)
    sp.add_argument("--filter", type=int, default=0)
    sp.add_argument("--k", type=int, default=9)
    sp.add_argument("--out-json")
    sp.add_argument("--sheet")
    sp.set_defaults(fn=cmd_patches)

    sp = sub.add_parser("dream", help="synthesize an input that maximizes a neuron")
    sp.add_argument("--model", required=True)
    sp.add_argument("--layer", default="conv3")
    sp.add_argument("--channel", type=int)
    sp.add_argument("--unit", help="c,y,x for conv layers; index for fc")
    sp.add_argument("--action", type=int, help="output neuron index")
    sp.add_argument("--iterations", type=int, default=512)
    sp.add_argument("--step-size", type=float, default=0.05)
    sp.add_argument("--jitter", type=int, default=4)
    sp.add_argument("--lambda-tv", type=float, default=0.0)
    sp.add_argument("--lambda-l1", type=float, default=0.0)
    sp.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history-csv")
    sp.set_defaults(fn=cmd_dream)

    sp = sub.add_parser("render-trace", help="render activation-trace frames as PNGs")
    sp.add_argument("--rollout", required=True)
    sp.add_argument("--model")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--count", type=int)
    sp.set_defaults(fn=cmd_render_trace)

    sp = sub.add_parser("render-grid", help="tile rollout frames as runs x algorithms")
    sp.add_argument("rollouts", nargs="+")
    sp.add_argument("--step", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_render_grid)

    sp = sub.add_parser("serve", help="serve exported data and the explorer UI read-only")
    sp.add_argument("--dir", required=True)
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        print(f"error: path not found: {e}", file=sys.stderr)
        return EXIT_MISSING_PATH
    except PolicyscopeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_DATA


if __name__ == "__main__":
    raise SystemExit(main())

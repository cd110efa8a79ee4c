"""Deterministic PNG rendering: activation-trace frames and rollout grids."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .errors import ConfigError
from .network import ActivationTrace
from .rollout import Rollout, StepRecord

_BG = 18
_PAD = 6


def save_png(image: np.ndarray, path: str | Path) -> None:
    Image.fromarray(image).save(path)


def _normalize(a: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi <= lo:
        return np.full(a.shape, 0.5)
    return np.clip((a.astype(np.float64) - lo) / (hi - lo), 0.0, 1.0)


def _to_u8(a: np.ndarray) -> np.ndarray:
    return np.round(a * 255).astype(np.uint8)


def _tile_grid(maps: np.ndarray, cols: int, scale: int, pad: int = 1) -> np.ndarray:
    """Tile (C,H,W) maps (already in [0,1]) into a grid image."""
    c, h, w = maps.shape
    rows = (c + cols - 1) // cols
    th, tw = h * scale, w * scale
    grid = np.full((rows * (th + pad) + pad, cols * (tw + pad) + pad), _BG, dtype=np.uint8)
    for i in range(c):
        r, cc = divmod(i, cols)
        tile = _to_u8(np.kron(maps[i], np.ones((scale, scale))))
        y0 = pad + r * (th + pad)
        x0 = pad + cc * (tw + pad)
        grid[y0 : y0 + th, x0 : x0 + tw] = tile
    return grid


@dataclass(frozen=True)
class MontageLayout:
    """Fixed pane parameters for trace rendering; deterministic for a given
    architecture."""

    obs_scale: int = 1
    conv_scales: tuple[int, ...] = (2, 3, 4)
    conv_cols: tuple[int, ...] = (8, 16, 16)
    fc_cols: int = 32
    fc_cell: int = 6
    bar_width: int = 22
    bar_height: int = 60


def compute_activation_ranges(traces: list[ActivationTrace]) -> dict[str, tuple[float, float]]:
    """Per-layer (min, max) over a whole rollout, so a rendered movie keeps
    stable brightness."""
    if not traces:
        raise ConfigError("no traces to normalize over")
    layers = [f"conv{i + 1}" for i in range(len(traces[0].convs))] + ["fc", "head_q"]
    out = {}
    for layer in layers:
        vals = [t.layer(layer) for t in traces]
        out[layer] = (float(min(v.min() for v in vals)), float(max(v.max() for v in vals)))
    return out


def render_trace_frame(
    step: StepRecord,
    trace: ActivationTrace | None,
    ranges: dict[str, tuple[float, float]],
    layout: MontageLayout = MontageLayout(),
) -> np.ndarray:
    """RGB frame on the left; observation channels, conv grids, hidden strip
    and per-action value bars stacked on the right."""
    if trace is None:
        raise ConfigError("step has no activation trace")
    panes: list[np.ndarray] = []

    obs = np.concatenate(
        [np.kron(step.obs[i], np.ones((layout.obs_scale, layout.obs_scale))) for i in range(step.obs.shape[0])],
        axis=1,
    )
    panes.append(_to_u8(np.clip(obs, 0, 1)))

    for i, conv in enumerate(trace.convs):
        lo, hi = ranges[f"conv{i + 1}"]
        scale = layout.conv_scales[min(i, len(layout.conv_scales) - 1)]
        cols = layout.conv_cols[min(i, len(layout.conv_cols) - 1)]
        panes.append(_tile_grid(_normalize(conv, lo, hi), cols=cols, scale=scale))

    lo, hi = ranges["fc"]
    fc = _normalize(trace.fc, lo, hi)
    rows = (fc.size + layout.fc_cols - 1) // layout.fc_cols
    padded = np.zeros(rows * layout.fc_cols)
    padded[: fc.size] = fc
    panes.append(_tile_grid(padded.reshape(rows, 1, layout.fc_cols)[:, 0][None], cols=1, scale=layout.fc_cell))

    qlo, qhi = ranges["head_q"]
    qn = _normalize(trace.head_q, qlo, qhi)
    bars = np.full((layout.bar_height + 2, len(qn) * (layout.bar_width + 2) + 2), _BG, dtype=np.uint8)
    for a, v in enumerate(qn):
        h = max(1, int(round(v * layout.bar_height)))
        x0 = 2 + a * (layout.bar_width + 2)
        shade = 255 if a == trace.chosen_action else 140
        bars[layout.bar_height + 1 - h : layout.bar_height + 1, x0 : x0 + layout.bar_width] = shade
    panes.append(bars)

    right_w = max(p.shape[1] for p in panes)
    right_h = sum(p.shape[0] for p in panes) + _PAD * (len(panes) + 1)
    right = np.full((right_h, right_w), _BG, dtype=np.uint8)
    y = _PAD
    for p in panes:
        right[y : y + p.shape[0], : p.shape[1]] = p
        y += p.shape[0] + _PAD

    h = max(step.frame.shape[0], right.shape[0]) + 2 * _PAD
    w = step.frame.shape[1] + right.shape[1] + 3 * _PAD
    canvas = np.full((h, w, 3), _BG, dtype=np.uint8)
    canvas[_PAD : _PAD + step.frame.shape[0], _PAD : _PAD + step.frame.shape[1]] = step.frame
    x0 = step.frame.shape[1] + 2 * _PAD
    canvas[_PAD : _PAD + right.shape[0], x0 : x0 + right.shape[1]] = right[..., None].repeat(3, axis=2)
    return canvas


def render_rollout_grid(rollout_matrix: list[list[Rollout]], step: int) -> np.ndarray:
    """Tile frames at one timestep: rows are independent runs, columns are
    algorithms. Rollouts that ended early freeze on their final frame."""
    if not rollout_matrix or not rollout_matrix[0]:
        raise ConfigError("rollout matrix is empty")
    n_cols = len(rollout_matrix[0])
    if any(len(row) != n_cols for row in rollout_matrix):
        raise ConfigError("rollout matrix rows have unequal lengths")
    label_h = 16
    label_w = 64
    fh, fw = 210, 160
    h = label_h + len(rollout_matrix) * (fh + _PAD) + _PAD
    w = label_w + n_cols * (fw + _PAD) + _PAD
    canvas = Image.new("RGB", (w, h), (_BG, _BG, _BG))
    draw = ImageDraw.Draw(canvas)
    for j, r in enumerate(rollout_matrix[0]):
        draw.text((label_w + _PAD + j * (fw + _PAD), 3), r.meta.model_meta.algorithm, fill=(220, 220, 220))
    for i, row in enumerate(rollout_matrix):
        y0 = label_h + _PAD + i * (fh + _PAD)
        draw.text((3, y0 + 2), row[0].meta.model_meta.run_id[:9], fill=(220, 220, 220))
        for j, r in enumerate(row):
            frame = r.steps[min(step, len(r.steps) - 1)].frame
            canvas.paste(Image.fromarray(frame), (label_w + _PAD + j * (fw + _PAD), y0))
    return np.asarray(canvas).copy()

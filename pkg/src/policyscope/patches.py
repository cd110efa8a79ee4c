"""Receptive-field arithmetic and maximal-activation patch extraction.

For a chosen conv filter, every rollout step contributes its activation
map's single maximum; steps are ranked by that maximum and the winning
units are mapped back to the input pixels they see.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError
from .model_io import FrozenModel
from .preprocessing import FRAME_HEIGHT, FRAME_WIDTH, OBS_SIZE
from .rollout import Rollout

_CHUNK = 32


@dataclass(frozen=True)
class ReceptiveField:
    """How much input one unit sees: ``size`` pixels on a side, with
    adjacent units ``jump`` input pixels apart."""

    size: int
    jump: int

    def top_left(self, x: int, y: int) -> tuple[int, int]:
        return x * self.jump, y * self.jump


def receptive_field(spec, layer: int) -> ReceptiveField:
    """Receptive field of conv layer ``layer`` (1-based), composed
    recursively: r <- r + (k-1)*j, j <- j*s per layer."""
    if not 1 <= layer <= len(spec.conv_layers):
        raise ConfigError(f"conv layer index {layer} out of range 1..{len(spec.conv_layers)}")
    size, jump = 1, 1
    for _o, k, s in spec.conv_layers[:layer]:
        size += (k - 1) * jump
        jump *= s
    return ReceptiveField(size=size, jump=jump)


@dataclass
class PatchHit:
    step: int
    x: int
    y: int
    activation: float
    rect: tuple[int, int, int, int]  # (x0, y0, x1, y1) in observation pixels
    patch: np.ndarray  # present-channel crop
    rgb_rect: tuple[int, int, int, int]  # same rectangle mapped onto the raw frame


def conv_maps(model: FrozenModel, obs_batch: np.ndarray, layer: int) -> np.ndarray:
    """Post-rectifier activation maps of one conv layer for a batch of
    observations."""
    x = obs_batch
    for i, (_o, _k, s) in enumerate(model.spec.conv_layers[:layer], start=1):
        pre, _ = ops.conv2d_forward_batch(x, model.tensors[f"conv{i}.w"], model.tensors[f"conv{i}.b"], s)
        x = ops.relu(pre)
    return x


def _map_rect_to_frame(rect: tuple[int, int, int, int]) -> tuple[int, int, int, int]:
    sx = FRAME_WIDTH / OBS_SIZE
    sy = FRAME_HEIGHT / OBS_SIZE
    x0, y0, x1, y1 = rect
    return (int(round(x0 * sx)), int(round(y0 * sy)), int(round(x1 * sx)), int(round(y1 * sy)))


def top_patches(model: FrozenModel, rollout: Rollout, layer: int, filter_index: int, k: int) -> list[PatchHit]:
    """The k step-maximal activations of one filter, with their input
    patches. Ordered by activation descending, ties by (step, y, x)."""
    rf = receptive_field(model.spec, layer)
    n_channels = model.spec.conv_layers[layer - 1][0]
    if not 0 <= filter_index < n_channels:
        raise ConfigError(f"filter {filter_index} out of range for conv{layer} ({n_channels} channels)")
    if not rollout.steps:
        return []

    entries = []  # (-act, step, y, x)
    obs = rollout.observations()
    for start in range(0, len(obs), _CHUNK):
        maps = conv_maps(model, obs[start : start + _CHUNK], layer)[:, filter_index]
        for off in range(maps.shape[0]):
            flat = int(np.argmax(maps[off]))
            y, x = divmod(flat, maps.shape[2])
            entries.append((-float(maps[off, y, x]), start + off, y, x))
    entries.sort()

    hits = []
    for neg_act, step, y, x in entries[: min(k, len(entries))]:
        x0, y0 = rf.top_left(x, y)
        x1 = min(x0 + rf.size, OBS_SIZE)
        y1 = min(y0 + rf.size, OBS_SIZE)
        patch = rollout.steps[step].obs[-1, y0:y1, x0:x1].copy()
        hits.append(
            PatchHit(
                step=step, x=x, y=y, activation=-neg_act,
                rect=(x0, y0, x1, y1), patch=patch,
                rgb_rect=_map_rect_to_frame((x0, y0, x1, y1)),
            )
        )
    return hits


def hits_to_json(hits: list[PatchHit]) -> str:
    return json.dumps(
        [
            {"step": h.step, "unit_x": h.x, "unit_y": h.y, "activation": h.activation,
             "rect": list(h.rect), "rgb_rect": list(h.rgb_rect)}
            for h in hits
        ],
        indent=1,
    )


def contact_sheet(hits: list[PatchHit], rollout: Rollout, scale: int = 4, pad: int = 4) -> np.ndarray:
    """One row per hit: the grayscale observation patch next to the matching
    crop of the raw RGB frame."""
    if not hits:
        raise ConfigError("no hits to render")
    gw = max(h.patch.shape[1] for h in hits) * scale
    gh = max(h.patch.shape[0] for h in hits) * scale
    rw = max(h.rgb_rect[2] - h.rgb_rect[0] for h in hits)
    rh = max(h.rgb_rect[3] - h.rgb_rect[1] for h in hits)
    row_h = max(gh, rh) + pad
    sheet = np.full((row_h * len(hits) + pad, gw + rw + 3 * pad, 3), 24, dtype=np.uint8)
    for i, h in enumerate(hits):
        y0 = pad + i * row_h
        gray = np.round(np.clip(h.patch, 0, 1) * 255).astype(np.uint8)
        gray = np.kron(gray, np.ones((scale, scale), dtype=np.uint8))
        sheet[y0 : y0 + gray.shape[0], pad : pad + gray.shape[1]] = gray[..., None]
        fx0, fy0, fx1, fy1 = h.rgb_rect
        crop = rollout.steps[h.step].frame[fy0:fy1, fx0:fx1]
        sheet[y0 : y0 + crop.shape[0], gw + 2 * pad : gw + 2 * pad + crop.shape[1]] = crop
    return sheet

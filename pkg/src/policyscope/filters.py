"""First-layer filter extraction and temporal-bias statistics.

The temporal profile measures how strongly first-layer weights attend to
each of the four stacked input frames, normalized so the newest (present)
frame sits at 1.0. ``present_bias`` collapses that to one number: the mean
past-to-present magnitude ratio.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFilterError
from .model_io import FrozenModel


@dataclass(frozen=True)
class TemporalProfile:
    """Per-input-frame mean |weight|, normalized by the present frame's."""

    magnitudes: tuple[float, ...]

    @property
    def present(self) -> float:
        return self.magnitudes[-1]


def first_layer_filters(model: FrozenModel) -> list[np.ndarray]:
    """One (in_channels, K, K) slice per first-layer output channel, in
    channel order. Slices are views into conv1.w, never copies."""
    w = model.tensors["conv1.w"]
    return [w[i] for i in range(w.shape[0])]


def temporal_profile(model: FrozenModel) -> TemporalProfile:
    # Magnitudes pool all filters jointly before the ratio.
    w = model.tensors["conv1.w"]
    per_channel = np.abs(w.astype(np.float64)).mean(axis=(0, 2, 3))
    if per_channel[-1] == 0.0:
        raise DegenerateFilterError("present-frame weights have zero mean magnitude")
    m = per_channel / per_channel[-1]
    return TemporalProfile(tuple(float(v) for v in m))


def present_bias(model: FrozenModel) -> float:
    """Mean past-frame magnitude relative to the present frame. 1.0 means no
    temporal preference; 0.0 means the past frames are ignored."""
    m = temporal_profile(model).magnitudes
    return float(np.mean(m[:-1]))


def rank_by_present_bias(models: list[tuple[str, FrozenModel]]) -> list[tuple[str, float]]:
    """Order (label, model) pairs by increasing present-focus, i.e.
    decreasing past-to-present ratio; ties break on the label."""
    scored = [(label, present_bias(model)) for label, model in models]
    return sorted(scored, key=lambda lb: (-lb[1], lb[0]))


def profiles_to_csv(rows: list[tuple[str, TemporalProfile, float]]) -> str:
    buf = io.StringIO()
    buf.write("label,m0,m1,m2,m3,bias\n")
    for label, profile, bias in rows:
        mags = ",".join(repr(float(v)) for v in profile.magnitudes)
        buf.write(f"{label},{mags},{bias!r}\n")
    return buf.getvalue()


def filter_mosaic(model: FrozenModel, scale: int = 6, pad: int = 2) -> np.ndarray:
    """Grayscale mosaic of first-layer filters: one row per output channel
    group, each filter's input-frame slices laid side by side, min-max
    normalized per filter."""
    filters = first_layer_filters(model)
    n_in = filters[0].shape[0]
    k = filters[0].shape[1]
    cols = 4
    rows = (len(filters) + cols - 1) // cols
    tile_w = (k * scale + pad) * n_in + 3 * pad
    tile_h = k * scale + 2 * pad
    img = np.full((rows * tile_h, cols * tile_w), 32, dtype=np.uint8)
    for idx, f in enumerate(filters):
        lo, hi = float(f.min()), float(f.max())
        norm = np.full_like(f, 0.5, dtype=np.float64) if hi == lo else (f.astype(np.float64) - lo) / (hi - lo)
        r, c = divmod(idx, cols)
        y0 = r * tile_h + pad
        for ch in range(n_in):
            x0 = c * tile_w + pad + ch * (k * scale + pad)
            tile = np.kron(norm[ch], np.ones((scale, scale)))
            img[y0 : y0 + k * scale, x0 : x0 + k * scale] = np.round(tile * 255).astype(np.uint8)
    return img

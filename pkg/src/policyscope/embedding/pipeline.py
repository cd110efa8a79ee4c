"""Embedding pipelines over rollouts, and the exported explorer bundle.

RAM states embed jointly across every run and algorithm (the 1024 RAM bits
are a shared coordinate system); hidden-layer embeddings are computed per
model, since each network learns its own representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ConfigError, MissingStreamError
from ..model_io import FrozenModel
from ..network import forward_with_trace
from ..rollout import Rollout
from .pca import PCA
from .tsne import TSNE

_PALETTE = (
    "#4363d8", "#e6194b", "#3cb44b", "#f58231", "#911eb4",
    "#46f0f0", "#bcf60c", "#fabebe", "#008080", "#9a6324",
)


@dataclass(frozen=True)
class SeriesInfo:
    algorithm: str
    run_id: str
    color_hint: str


@dataclass
class EmbeddedPoint:
    x: float
    y: float
    series_index: int
    step: int
    score: float
    frame_ref: str | None = None


@dataclass
class EmbeddingResult:
    params: dict
    series: list[SeriesInfo]
    points: list[EmbeddedPoint]
    # (rollout index, step) per point plus the rollouts themselves; kept in
    # memory only, so thumbnails can be written at export time.
    sources: list[tuple[int, int]] = field(default_factory=list)
    rollouts: list[Rollout] = field(default_factory=list)


def ram_to_bits(ram_rows: np.ndarray) -> np.ndarray:
    """Unpack (N, 128) RAM bytes into (N, 1024) 0/1 features, most
    significant bit first within each byte."""
    return np.unpackbits(np.asarray(ram_rows, dtype=np.uint8), axis=1).astype(np.float64)


def _reduce(features: np.ndarray, pca_dims: int, perplexity: float, iterations: int, seed: int) -> np.ndarray:
    reduced = PCA(n_components=pca_dims).fit_transform(features)
    return TSNE(perplexity=perplexity, n_iter=iterations, random_state=seed).fit_transform(reduced)


def _assemble(rollouts: list[Rollout], coords: np.ndarray, params: dict) -> EmbeddingResult:
    series: list[SeriesInfo] = []
    series_key: dict[tuple[str, str], int] = {}
    points: list[EmbeddedPoint] = []
    sources: list[tuple[int, int]] = []
    i = 0
    for ri, r in enumerate(rollouts):
        key = (r.meta.model_meta.algorithm, r.meta.model_meta.run_id)
        if key not in series_key:
            series_key[key] = len(series)
            series.append(SeriesInfo(key[0], key[1], _PALETTE[len(series) % len(_PALETTE)]))
        si = series_key[key]
        for step, rec in enumerate(r.steps):
            points.append(EmbeddedPoint(float(coords[i, 0]), float(coords[i, 1]), si, step, rec.score))
            sources.append((ri, step))
            i += 1
    return EmbeddingResult(params=params, series=series, points=points, sources=sources, rollouts=list(rollouts))


def embed_ram_joint(rollouts: list[Rollout], pca_dims: int = 50, perplexity: float = 30.0,
                    iterations: int = 3000, seed: int = 0) -> EmbeddingResult:
    """Joint 2-D embedding of RAM states across all given rollouts."""
    if not rollouts:
        raise ConfigError("no rollouts to embed")
    for r in rollouts:
        if not r.steps:
            raise MissingStreamError("a rollout has no recorded RAM states")
    features = ram_to_bits(np.concatenate([r.ram_matrix() for r in rollouts]))
    params = {"pca_dims": pca_dims, "perplexity": perplexity, "iterations": iterations,
              "seed": seed, "source": "ram"}
    coords = _reduce(features, pca_dims, perplexity, iterations, seed)
    return _assemble(rollouts, coords, params)


def embed_hidden(model: FrozenModel | None, rollout: Rollout, layer: str = "fc",
                 pca_dims: int = 50, perplexity: float = 30.0, iterations: int = 3000,
                 seed: int = 0) -> EmbeddingResult:
    """Per-model 2-D embedding of one rollout's hidden representations,
    taken from captured traces or recomputed with the model."""
    if not rollout.steps:
        raise ConfigError("rollout is empty")
    if rollout.traces is not None:
        vectors = [tr.layer(layer).ravel() for tr in rollout.traces]
    else:
        if model is None:
            raise ConfigError("rollout has no cached activations; a model is required to recompute")
        vectors = [forward_with_trace(model, s.obs).layer(layer).ravel() for s in rollout.steps]
    features = np.stack(vectors).astype(np.float64)
    params = {"pca_dims": pca_dims, "perplexity": perplexity, "iterations": iterations,
              "seed": seed, "source": f"hidden:{layer}"}
    coords = _reduce(features, pca_dims, perplexity, iterations, seed)
    return _assemble([rollout], coords, params)


def export_embedding(result: EmbeddingResult, directory: str | Path) -> Path:
    """Write ``embedding.json`` plus one PNG thumbnail per point under
    ``frames/``. Returns the JSON path."""
    if not result.rollouts:
        raise ConfigError("embedding has no frame sources; re-run the pipeline before exporting")
    d = Path(directory)
    (d / "frames").mkdir(parents=True, exist_ok=True)
    for i, (pt, (ri, step)) in enumerate(zip(result.points, result.sources)):
        ref = f"frames/p{i:05d}.png"
        Image.fromarray(result.rollouts[ri].steps[step].frame).save(d / ref)
        pt.frame_ref = ref
    payload = {
        "params": result.params,
        "series": [
            {"algorithm": s.algorithm, "run_id": s.run_id, "color_hint": s.color_hint}
            for s in result.series
        ],
        "points": [
            {"x": p.x, "y": p.y, "series_index": p.series_index, "step": p.step,
             "score": p.score, "frame_ref": p.frame_ref}
            for p in result.points
        ],
    }
    out = d / "embedding.json"
    out.write_text(json.dumps(payload), encoding="utf-8")
    return out


def load_embedding(path: str | Path) -> EmbeddingResult:
    """Parse an exported embedding.json (without frame sources)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    series = [SeriesInfo(s["algorithm"], s["run_id"], s["color_hint"]) for s in data["series"]]
    points = [
        EmbeddedPoint(p["x"], p["y"], p["series_index"], p["step"], p["score"], p.get("frame_ref"))
        for p in data["points"]
    ]
    return EmbeddingResult(params=data["params"], series=series, points=points)

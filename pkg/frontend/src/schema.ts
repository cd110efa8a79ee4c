import type { EmbeddingData } from './types.js';

export class SchemaError extends Error {}

function fail(path: string, want: string): never {
  throw new SchemaError(`embedding.json: ${path}: expected ${want}`);
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === 'object' && v !== null && !Array.isArray(v);
}

function requireFinite(v: unknown, path: string): number {
  if (typeof v !== 'number' || !Number.isFinite(v)) fail(path, 'a finite number');
  return v;
}

function requireString(v: unknown, path: string): string {
  if (typeof v !== 'string') fail(path, 'a string');
  return v;
}

/** Validate a parsed embedding.json payload, shaping it into EmbeddingData.
 * Throws SchemaError with a human-readable location on any violation. */
export function parseEmbedding(raw: unknown): EmbeddingData {
  if (!isRecord(raw)) fail('$', 'an object');
  if (!isRecord(raw.params)) fail('params', 'an object');
  if (!Array.isArray(raw.series)) fail('series', 'an array');
  if (!Array.isArray(raw.points)) fail('points', 'an array');

  const series = raw.series.map((s, i) => {
    if (!isRecord(s)) fail(`series[${i}]`, 'an object');
    return {
      algorithm: requireString(s.algorithm, `series[${i}].algorithm`),
      run_id: requireString(s.run_id, `series[${i}].run_id`),
      color_hint: requireString(s.color_hint, `series[${i}].color_hint`),
    };
  });

  const points = raw.points.map((p, i) => {
    if (!isRecord(p)) fail(`points[${i}]`, 'an object');
    const seriesIndex = requireFinite(p.series_index, `points[${i}].series_index`);
    if (!Number.isInteger(seriesIndex) || seriesIndex < 0 || seriesIndex >= series.length) {
      fail(`points[${i}].series_index`, `an integer in [0, ${series.length})`);
    }
    return {
      x: requireFinite(p.x, `points[${i}].x`),
      y: requireFinite(p.y, `points[${i}].y`),
      series_index: seriesIndex,
      step: requireFinite(p.step, `points[${i}].step`),
      score: requireFinite(p.score, `points[${i}].score`),
      frame_ref: p.frame_ref == null ? null : requireString(p.frame_ref, `points[${i}].frame_ref`),
    };
  });

  return { params: raw.params, series, points };
}

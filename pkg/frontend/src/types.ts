export interface SeriesInfo {
  algorithm: string;
  run_id: string;
  color_hint: string;
}

export interface EmbeddedPoint {
  x: number;
  y: number;
  series_index: number;
  step: number;
  score: number;
  frame_ref: string | null;
}

export interface EmbeddingData {
  params: Record<string, unknown>;
  series: SeriesInfo[];
  points: EmbeddedPoint[];
}

export interface Bounds {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
}

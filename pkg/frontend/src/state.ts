import { scoreShade } from './color.js';
import { GridIndex } from './spatial.js';
import type { ViewTransform } from './transform.js';
import type { EmbeddingData } from './types.js';

export const HIT_RADIUS_PX = 7;

/** Pure view state over an exported embedding: series visibility, point
 * selection and score coloring. Never mutates the loaded data. */
export class ExplorerState {
  readonly data: EmbeddingData;
  private hidden = new Set<number>();
  private selectedIndex: number | null = null;
  private index: GridIndex;
  private scoreRanges: Array<[number, number]>;

  constructor(data: EmbeddingData) {
    this.data = data;
    this.index = new GridIndex(data.points);
    this.scoreRanges = data.series.map(() => [Infinity, -Infinity]);
    for (const p of data.points) {
      const r = this.scoreRanges[p.series_index];
      r[0] = Math.min(r[0], p.score);
      r[1] = Math.max(r[1], p.score);
    }
  }

  seriesVisible(series: number): boolean {
    this.checkSeries(series);
    return !this.hidden.has(series);
  }

  get selected(): number | null {
    return this.selectedIndex;
  }

  private checkSeries(series: number): void {
    if (!Number.isInteger(series) || series < 0 || series >= this.data.series.length) {
      throw new RangeError(`unknown series id: ${series}`);
    }
  }

  /** Flip one series' visibility. Toggling twice restores the view exactly;
   * hiding a series drops any selection it owned. */
  toggleSeries(series: number): void {
    this.checkSeries(series);
    if (this.hidden.has(series)) {
      this.hidden.delete(series);
    } else {
      this.hidden.add(series);
      if (this.selectedIndex !== null && this.data.points[this.selectedIndex].series_index === series) {
        this.selectedIndex = null;
      }
    }
  }

  visiblePointIndices(): number[] {
    const out: number[] = [];
    this.data.points.forEach((p, i) => {
      if (!this.hidden.has(p.series_index)) out.push(i);
    });
    return out;
  }

  /** Select the nearest visible point within the hit radius of a screen
   * position; clears the selection when nothing is close enough. */
  selectAt(sx: number, sy: number, transform: ViewTransform, radiusPx: number = HIT_RADIUS_PX): number | null {
    const [dx, dy] = transform.toData(sx, sy);
    const dataRadius = radiusPx / transform.scale;
    let best: number | null = null;
    let bestDist = Infinity;
    for (const i of this.index.queryCircle(dx, dy, dataRadius)) {
      const p = this.data.points[i];
      if (this.hidden.has(p.series_index)) continue;
      const ddx = p.x - dx;
      const ddy = p.y - dy;
      const d = ddx * ddx + ddy * ddy;
      if (d < bestDist) {
        bestDist = d;
        best = i;
      }
    }
    this.selectedIndex = best;
    return best;
  }

  clearSelection(): void {
    this.selectedIndex = null;
  }

  /** Score-shaded fill color for one point (darker = higher score). */
  colorFor(pointIndex: number): string {
    const p = this.data.points[pointIndex];
    const [lo, hi] = this.scoreRanges[p.series_index];
    const t = hi > lo ? (p.score - lo) / (hi - lo) : 0.5;
    return scoreShade(this.data.series[p.series_index].color_hint, t);
  }
}

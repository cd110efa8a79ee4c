import type { EmbeddedPoint } from './types.js';

/** Uniform-grid spatial index over data coordinates, so hit-testing stays
 * O(candidates) for thousands of points. */
export class GridIndex {
  private cells = new Map<string, number[]>();
  private cell: number;

  constructor(private points: EmbeddedPoint[], targetPerCell = 8) {
    const n = Math.max(points.length, 1);
    let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
    for (const p of points) {
      minX = Math.min(minX, p.x);
      maxX = Math.max(maxX, p.x);
      minY = Math.min(minY, p.y);
      maxY = Math.max(maxY, p.y);
    }
    const area = Math.max((maxX - minX) * (maxY - minY), 1e-9);
    this.cell = Math.sqrt((area * targetPerCell) / n) || 1;
    points.forEach((p, i) => {
      const key = this.keyFor(p.x, p.y);
      const bucket = this.cells.get(key);
      if (bucket) bucket.push(i);
      else this.cells.set(key, [i]);
    });
  }

  private keyFor(x: number, y: number): string {
    return `${Math.floor(x / this.cell)},${Math.floor(y / this.cell)}`;
  }

  /** Indices of points within radius of (x, y), unfiltered by visibility. */
  queryCircle(x: number, y: number, radius: number): number[] {
    const out: number[] = [];
    const r2 = radius * radius;
    const c0x = Math.floor((x - radius) / this.cell);
    const c1x = Math.floor((x + radius) / this.cell);
    const c0y = Math.floor((y - radius) / this.cell);
    const c1y = Math.floor((y + radius) / this.cell);
    for (let cx = c0x; cx <= c1x; cx++) {
      for (let cy = c0y; cy <= c1y; cy++) {
        const bucket = this.cells.get(`${cx},${cy}`);
        if (!bucket) continue;
        for (const i of bucket) {
          const p = this.points[i];
          const dx = p.x - x;
          const dy = p.y - y;
          if (dx * dx + dy * dy <= r2) out.push(i);
        }
      }
    }
    return out;
  }
}

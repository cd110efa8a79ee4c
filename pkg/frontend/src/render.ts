import type { ExplorerState } from './state.js';
import type { ViewTransform } from './transform.js';

/** The canvas surface render() needs; tests substitute a recorder. */
export interface MarkSurface {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
}

const MARK_RADIUS = 3;

/** Draw every visible point; returns how many marks were placed. The
 * selected point gets a highlight ring. */
export function render(ctx: MarkSurface, state: ExplorerState, transform: ViewTransform): number {
  let drawn = 0;
  for (const i of state.visiblePointIndices()) {
    const p = state.data.points[i];
    const [sx, sy] = transform.toScreen(p.x, p.y);
    ctx.fillStyle = state.colorFor(i);
    ctx.beginPath();
    ctx.arc(sx, sy, MARK_RADIUS, 0, Math.PI * 2);
    ctx.fill();
    drawn += 1;
  }
  if (state.selected !== null) {
    const p = state.data.points[state.selected];
    const [sx, sy] = transform.toScreen(p.x, p.y);
    ctx.strokeStyle = '#ffffff';
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(sx, sy, MARK_RADIUS + 3, 0, Math.PI * 2);
    ctx.stroke();
  }
  return drawn;
}

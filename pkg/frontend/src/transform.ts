import type { Bounds, EmbeddedPoint } from './types.js';

export function pointBounds(points: EmbeddedPoint[]): Bounds {
  if (points.length === 0) return { minX: -1, maxX: 1, minY: -1, maxY: 1 };
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const p of points) {
    if (p.x < minX) minX = p.x;
    if (p.x > maxX) maxX = p.x;
    if (p.y < minY) minY = p.y;
    if (p.y > maxY) maxY = p.y;
  }
  return { minX, maxX, minY, maxY };
}

/** Affine data<->screen mapping with pan and zoom; screen y points down. */
export class ViewTransform {
  constructor(
    public scale: number,
    public offsetX: number,
    public offsetY: number,
  ) {}

  static fit(bounds: Bounds, width: number, height: number, margin = 24): ViewTransform {
    const spanX = Math.max(bounds.maxX - bounds.minX, 1e-9);
    const spanY = Math.max(bounds.maxY - bounds.minY, 1e-9);
    const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
    const cx = (bounds.minX + bounds.maxX) / 2;
    const cy = (bounds.minY + bounds.maxY) / 2;
    return new ViewTransform(scale, width / 2 - cx * scale, height / 2 + cy * scale);
  }

  toScreen(x: number, y: number): [number, number] {
    return [x * this.scale + this.offsetX, -y * this.scale + this.offsetY];
  }

  toData(sx: number, sy: number): [number, number] {
    return [(sx - this.offsetX) / this.scale, -(sy - this.offsetY) / this.scale];
  }

  zoomAt(sx: number, sy: number, factor: number): void {
    const [dx, dy] = this.toData(sx, sy);
    this.scale *= factor;
    this.offsetX = sx - dx * this.scale;
    this.offsetY = sy + dy * this.scale;
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }
}

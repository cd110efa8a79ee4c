/** Per-series hue from the export's color hint, luminance from the score:
 * darker marks are higher-scoring states. */

export function hexToHsl(hex: string): [number, number, number] {
  const m = /^#?([0-9a-f]{6})$/i.exec(hex.trim());
  const v = m ? parseInt(m[1], 16) : 0x888888;
  const r = ((v >> 16) & 0xff) / 255;
  const g = ((v >> 8) & 0xff) / 255;
  const b = (v & 0xff) / 255;
  const max = Math.max(r, g, b);
  const min = Math.min(r, g, b);
  const l = (max + min) / 2;
  if (max === min) return [0, 0, l];
  const d = max - min;
  const s = l > 0.5 ? d / (2 - max - min) : d / (max + min);
  let h: number;
  if (max === r) h = ((g - b) / d + (g < b ? 6 : 0)) / 6;
  else if (max === g) h = ((b - r) / d + 2) / 6;
  else h = ((r - g) / d + 4) / 6;
  return [h * 360, s, l];
}

export function scoreShade(colorHint: string, normalizedScore: number): string {
  const [h, s] = hexToHsl(colorHint);
  const t = Math.min(Math.max(normalizedScore, 0), 1);
  const light = 0.78 - 0.5 * t; // score 0 -> pale, score 1 -> dark
  return `hsl(${h.toFixed(1)}, ${(s * 100).toFixed(1)}%, ${(light * 100).toFixed(1)}%)`;
}

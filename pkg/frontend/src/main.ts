import { render } from './render.js';
import { parseEmbedding, SchemaError } from './schema.js';
import { ExplorerState } from './state.js';
import { pointBounds, ViewTransform } from './transform.js';

const canvas = document.getElementById('plot') as HTMLCanvasElement;
const legend = document.getElementById('legend') as HTMLElement;
const detail = document.getElementById('detail') as HTMLElement;
const banner = document.getElementById('banner') as HTMLElement;

let state: ExplorerState | null = null;
let transform: ViewTransform | null = null;
let frameToken = 0;

function showError(message: string): void {
  banner.textContent = message;
  banner.style.display = 'block';
}

function redraw(): void {
  if (!state || !transform) return;
  const ctx = canvas.getContext('2d')!;
  ctx.fillStyle = '#101418';
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  render(ctx, state, transform);
}

function buildLegend(): void {
  if (!state) return;
  legend.replaceChildren();
  state.data.series.forEach((s, i) => {
    const item = document.createElement('button');
    item.className = 'series';
    const chip = document.createElement('span');
    chip.className = 'chip';
    chip.style.background = s.color_hint;
    item.append(chip, `${s.algorithm} / ${s.run_id}`);
    item.addEventListener('click', () => {
      state!.toggleSeries(i);
      item.classList.toggle('off', !state!.seriesVisible(i));
      updateDetail();
      redraw();
    });
    legend.append(item);
  });
}

function updateDetail(): void {
  if (!state) return;
  const sel = state.selected;
  if (sel === null) {
    detail.replaceChildren('click a point to inspect its frame');
    return;
  }
  const p = state.data.points[sel];
  const s = state.data.series[p.series_index];
  const caption = document.createElement('div');
  caption.textContent = `${s.algorithm} / ${s.run_id} — step ${p.step}, score ${p.score}`;
  detail.replaceChildren(caption);
  if (p.frame_ref) {
    // async image fetch; discard if the selection moved on meanwhile
    const token = ++frameToken;
    const img = new Image();
    img.onload = () => {
      if (token === frameToken) detail.append(img);
    };
    img.src = p.frame_ref;
  }
}

function wireInteraction(): void {
  let dragging = false;
  let moved = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener('mousedown', (e) => {
    dragging = true;
    moved = false;
    last = [e.offsetX, e.offsetY];
  });
  canvas.addEventListener('mousemove', (e) => {
    if (!dragging || !transform) return;
    const dx = e.offsetX - last[0];
    const dy = e.offsetY - last[1];
    if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
    transform.panBy(dx, dy);
    last = [e.offsetX, e.offsetY];
    redraw();
  });
  window.addEventListener('mouseup', (e) => {
    if (!dragging) return;
    dragging = false;
    if (!moved && state && transform) {
      const rect = canvas.getBoundingClientRect();
      state.selectAt(e.clientX - rect.left, e.clientY - rect.top, transform);
      updateDetail();
      redraw();
    }
  });
  canvas.addEventListener('wheel', (e) => {
    if (!transform) return;
    e.preventDefault();
    transform.zoomAt(e.offsetX, e.offsetY, e.deltaY < 0 ? 1.15 : 1 / 1.15);
    redraw();
  });
}

async function boot(): Promise<void> {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  try {
    const resp = await fetch('embedding.json');
    if (!resp.ok) throw new Error(`fetch failed: HTTP ${resp.status}`);
    state = new ExplorerState(parseEmbedding(await resp.json()));
  } catch (err) {
    showError(err instanceof SchemaError ? err.message : `could not load embedding.json: ${err}`);
    return;
  }
  transform = ViewTransform.fit(pointBounds(state.data.points), canvas.width, canvas.height);
  buildLegend();
  updateDetail();
  wireInteraction();
  redraw();
}

boot();

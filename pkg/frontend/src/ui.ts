/**
 * Thin DOM layer: renders the store into the static page and forwards
 * user events to store actions. All pixels shown come from service
 * URLs; this module never synthesizes image data.
 */

import { ApiClient } from './api.js';
import { EditorStore, Projector } from './store.js';

const ALPHA_GRID = [-3, -1.5, 0, 1.5, 3];

export function bindUi(root: Document, store: EditorStore, api: ApiClient): void {
  const el = <T extends HTMLElement>(id: string) => root.getElementById(id) as T;

  const fileInput = el<HTMLInputElement>('upload');
  fileInput.addEventListener('change', async () => {
    const file = fileInput.files?.[0];
    if (file) {
      await store.upload(await file.arrayBuffer());
    }
  });

  el<HTMLButtonElement>('invert').addEventListener('click', () => {
    const projector = el<HTMLSelectElement>('projector').value as Projector;
    void store.invert(projector);
  });

  el<HTMLButtonElement>('adapt').addEventListener('click', () => {
    void store.adapt();
  });

  el<HTMLInputElement>('use-base').addEventListener('change', (ev) => {
    store.useBase = (ev.target as HTMLInputElement).checked;
    render(root, store, api);
  });

  store.subscribe(() => render(root, store, api));
  render(root, store, api);
}

function render(root: Document, store: EditorStore, api: ApiClient): void {
  const el = <T extends HTMLElement>(id: string) => root.getElementById(id) as T;

  setPane(root, 'pane-input', store.panes.input, api);
  setPane(root, 'pane-recon', store.panes.reconstruction, api);
  setPane(root, 'pane-edit', store.panes.currentEdit, api);

  const progress = el<HTMLProgressElement>('job-progress');
  progress.value = store.jobProgress;
  drawSparkline(el<HTMLCanvasElement>('loss-sparkline'), store.lossCurve);

  const sliders = el<HTMLDivElement>('sliders');
  if (sliders.childElementCount === 0 && store.attributes.length > 0) {
    for (const attr of store.attributes) {
      const row = root.createElement('div');
      row.className = 'slider-row';
      const label = root.createElement('label');
      label.textContent = `${attr.name} (fit acc ${attr.train_accuracy.toFixed(2)})`;
      const input = root.createElement('input');
      input.type = 'range';
      input.min = '-3';
      input.max = '3';
      input.step = '0.25';
      input.value = '0';
      input.id = `slider-${attr.name}`;
      input.addEventListener('input', () => {
        store.setSlider(attr.name, parseFloat(input.value));
      });
      const film = root.createElement('button');
      film.textContent = 'filmstrip';
      film.addEventListener('click', () => void store.filmstrip(attr.name, ALPHA_GRID));
      row.append(label, input, film);
      sliders.append(row);
    }
  }
  for (const attr of store.attributes) {
    const input = root.getElementById(`slider-${attr.name}`) as HTMLInputElement | null;
    if (input) {
      input.disabled = !store.slidersEnabled;
    }
  }

  const strips = el<HTMLDivElement>('filmstrips');
  strips.textContent = '';
  for (const [attr, frames] of Object.entries(store.filmstrips)) {
    const row = root.createElement('div');
    row.className = 'filmstrip';
    const title = root.createElement('span');
    title.textContent = attr;
    row.append(title);
    for (const frame of frames) {
      const img = root.createElement('img');
      img.src = api.resolve(frame.url);
      img.title = `alpha=${frame.alpha}`;
      img.width = 96;
      row.append(img);
    }
    strips.append(row);
  }

  const toasts = el<HTMLDivElement>('toasts');
  toasts.textContent = '';
  for (const toast of store.toasts.slice(-4)) {
    const div = root.createElement('div');
    div.className = 'toast';
    div.textContent = toast.status ? `${toast.status}: ${toast.message}` : toast.message;
    toasts.append(div);
  }
}

function setPane(root: Document, id: string, url: string | null, api: ApiClient): void {
  const img = root.getElementById(id) as HTMLImageElement;
  if (url) {
    const resolved = api.resolve(url);
    if (img.src !== resolved) {
      img.src = resolved;
    }
    img.style.visibility = 'visible';
  } else {
    img.removeAttribute('src');
    img.style.visibility = 'hidden';
  }
}

function drawSparkline(canvas: HTMLCanvasElement, curve: number[]): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (curve.length < 2) return;
  const max = Math.max(...curve);
  const min = Math.min(...curve);
  const span = max - min || 1;
  ctx.beginPath();
  curve.forEach((v, i) => {
    const x = (i / (curve.length - 1)) * (canvas.width - 2) + 1;
    const y = canvas.height - 1 - ((v - min) / span) * (canvas.height - 2);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.strokeStyle = '#6cf';
  ctx.stroke();
}

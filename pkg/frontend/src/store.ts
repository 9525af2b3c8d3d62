/**
 * UI session state and actions, independent of the DOM.
 *
 * Invariants the tests pin down:
 *  - every displayed image URL originates from the service;
 *  - sliders stay disabled until the adaptation job is done (or the
 *    user opts into the base model);
 *  - slider moves debounce into edit requests with latest-wins
 *    cancellation per attribute;
 *  - revisiting a cached alpha re-renders from cache without a request;
 *  - polled job progress is surfaced monotonically.
 */

import { ApiClient, AttributeInfo, JobSnapshot } from './api.js';

export type Projector = 'encoder' | 'latent_opt' | 'random';

export interface Panes {
  input: string | null;
  reconstruction: string | null;
  currentEdit: string | null;
}

export interface Toast {
  message: string;
  status?: number;
}

export interface StoreOptions {
  debounceMs?: number;
  pollIntervalMs?: number;
  setTimeoutFn?: typeof setTimeout;
  clearTimeoutFn?: typeof clearTimeout;
  sleep?: (ms: number) => Promise<void>;
}

interface PendingEdit {
  timer: ReturnType<typeof setTimeout> | null;
  generation: number;
}

export class EditorStore {
  sessionId: string | null = null;
  projector: Projector = 'encoder';
  attributes: AttributeInfo[] = [];
  panes: Panes = { input: null, reconstruction: null, currentEdit: null };
  sliderValues: Record<string, number> = {};
  lastRequestedAlpha: Record<string, number> = {};
  jobProgress = 0;
  lossCurve: number[] = [];
  adapted = false;
  useBase = false;
  busy = false;
  toasts: Toast[] = [];
  filmstrips: Record<string, { alpha: number; url: string }[]> = {};

  /** (attribute, alpha) -> service image URL; authoritative edit cache. */
  private editCache = new Map<string, Map<number, string>>();
  private pending = new Map<string, PendingEdit>();
  private listeners: (() => void)[] = [];
  private readonly debounceMs: number;
  private readonly pollIntervalMs: number;
  private readonly setTimeoutFn: typeof setTimeout;
  private readonly clearTimeoutFn: typeof clearTimeout;
  private readonly sleep?: (ms: number) => Promise<void>;

  constructor(private api: ApiClient, options: StoreOptions = {}) {
    this.debounceMs = options.debounceMs ?? 150;
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
    this.setTimeoutFn = options.setTimeoutFn ?? setTimeout;
    this.clearTimeoutFn = options.clearTimeoutFn ?? clearTimeout;
    this.sleep = options.sleep;
  }

  /** True once editing is allowed: adaptation finished or base opt-in. */
  get slidersEnabled(): boolean {
    return this.panes.reconstruction !== null && (this.adapted || this.useBase);
  }

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) {
      fn();
    }
  }

  private toast(message: string, status?: number): void {
    this.toasts.push({ message, status });
    this.emit();
  }

  private async guard<T>(op: () => Promise<T>): Promise<T | null> {
    try {
      return await op();
    } catch (err: any) {
      this.toast(err?.message ?? String(err), err?.status);
      return null;
    }
  }

  async start(): Promise<void> {
    await this.guard(async () => {
      this.sessionId = await this.api.createSession();
      this.attributes = await this.api.attributes();
      for (const a of this.attributes) {
        this.sliderValues[a.name] = 0;
      }
      this.emit();
    });
  }

  async upload(png: ArrayBuffer | Uint8Array): Promise<void> {
    if (!this.sessionId) return;
    await this.guard(async () => {
      const url = await this.api.uploadImage(this.sessionId!, png);
      this.panes = { input: url, reconstruction: null, currentEdit: null };
      this.adapted = false;
      this.jobProgress = 0;
      this.lossCurve = [];
      this.editCache.clear();
      this.filmstrips = {};
      this.emit();
    });
  }

  async invert(projector: Projector = this.projector,
               opts: { seed?: number; steps?: number } = {}): Promise<void> {
    if (!this.sessionId) return;
    this.projector = projector;
    await this.guard(async () => {
      this.busy = true;
      this.emit();
      const res = await this.api.invert(this.sessionId!, { method: projector, ...opts });
      let reconUrl: string;
      if (res.kind === 'job') {
        const final = await this.api.pollJob(res.jobId, (s) => this.onJobSnapshot(s),
                                             this.pollIntervalMs, this.sleep);
        reconUrl = final.result!.recon_image_url!;
      } else {
        reconUrl = res.reconImageUrl;
      }
      this.panes = { ...this.panes, reconstruction: reconUrl, currentEdit: null };
      this.adapted = false;
      this.editCache.clear();
      this.busy = false;
      this.emit();
    });
    this.busy = false;
  }

  private onJobSnapshot(snap: JobSnapshot): void {
    // progress is rendered monotonically even if a poll raced
    this.jobProgress = Math.max(this.jobProgress, snap.progress);
    this.lossCurve = snap.loss_curve;
    this.emit();
  }

  async adapt(params: { steps?: number } = {}): Promise<void> {
    if (!this.sessionId) return;
    await this.guard(async () => {
      this.busy = true;
      this.jobProgress = 0;
      this.lossCurve = [];
      this.emit();
      const jobId = await this.api.adapt(this.sessionId!, params);
      const final = await this.api.pollJob(jobId, (s) => this.onJobSnapshot(s),
                                           this.pollIntervalMs, this.sleep);
      this.adapted = true;
      const reconUrl = final.result?.recon_image_url;
      if (reconUrl) {
        this.panes = { ...this.panes, reconstruction: reconUrl };
        this.cachePut('*', 0, reconUrl);
      }
      this.busy = false;
      this.emit();
    });
    this.busy = false;
  }

  private cacheGet(attribute: string, alpha: number): string | undefined {
    return this.editCache.get(attribute)?.get(alpha)
      ?? (alpha === 0 ? this.editCache.get('*')?.get(0) : undefined);
  }

  private cachePut(attribute: string, alpha: number, url: string): void {
    if (!this.editCache.has(attribute)) {
      this.editCache.set(attribute, new Map());
    }
    this.editCache.get(attribute)!.set(alpha, url);
  }

  /**
   * Slider movement: updates the value immediately, then either serves
   * the pane from cache or debounce-fires an edit request. A newer move
   * for the same attribute supersedes an in-flight one (latest wins).
   */
  setSlider(attribute: string, alpha: number): void {
    if (!this.slidersEnabled) return;
    this.sliderValues[attribute] = alpha;
    const cached = this.cacheGet(attribute, alpha);
    const entry = this.pending.get(attribute) ?? { timer: null, generation: 0 };
    entry.generation += 1;
    if (entry.timer !== null) {
      this.clearTimeoutFn(entry.timer);
      entry.timer = null;
    }
    this.pending.set(attribute, entry);
    if (cached !== undefined) {
      this.panes = { ...this.panes, currentEdit: cached };
      this.emit();
      return;
    }
    const generation = entry.generation;
    entry.timer = this.setTimeoutFn(() => {
      void this.fireEdit(attribute, alpha, generation);
    }, this.debounceMs);
    this.emit();
  }

  private async fireEdit(attribute: string, alpha: number,
                         generation: number): Promise<void> {
    if (!this.sessionId) return;
    this.lastRequestedAlpha[attribute] = alpha;
    const res = await this.guard(() =>
      this.api.edit(this.sessionId!, attribute, alpha, this.useBase && !this.adapted));
    if (!res) return;
    this.cachePut(attribute, alpha, res.image_url);
    const entry = this.pending.get(attribute);
    if (entry && entry.generation === generation) {
      this.panes = { ...this.panes, currentEdit: res.image_url };
      this.emit();
    }
    // a superseded response still lands in the cache, but never the pane
  }

  /** Render the full alpha grid for one attribute as a filmstrip. */
  async filmstrip(attribute: string, alphas: number[]): Promise<void> {
    if (!this.sessionId || !this.slidersEnabled) return;
    await this.guard(async () => {
      const frames: { alpha: number; url: string }[] = [];
      for (const alpha of alphas) {
        let url = this.cacheGet(attribute, alpha);
        if (url === undefined) {
          const res = await this.api.edit(this.sessionId!, attribute, alpha,
                                          this.useBase && !this.adapted);
          url = res.image_url;
          this.cachePut(attribute, alpha, url);
        }
        frames.push({ alpha, url });
      }
      this.filmstrips[attribute] = frames;
      this.emit();
    });
  }

  /** All image URLs the UI currently renders, for invariant checks. */
  renderedImageUrls(): string[] {
    const urls = [this.panes.input, this.panes.reconstruction, this.panes.currentEdit]
      .filter((u): u is string => u !== null);
    for (const frames of Object.values(this.filmstrips)) {
      urls.push(...frames.map((f) => f.url));
    }
    return urls;
  }
}

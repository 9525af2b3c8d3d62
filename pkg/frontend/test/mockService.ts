/**
 * Scripted in-memory mock of the editing service, exposed as a
 * fetch-compatible function so the real ApiClient runs against it.
 *
 * Mirrors the service semantics the UI relies on: content-addressed
 * image URLs (alpha=0 edits return the adapted reconstruction's URL),
 * job polling with a scripted progress sequence, and 409 on edits
 * before adaptation without the base-model opt-in.
 */

import type { FetchLike } from '../src/api.js';

function jsonResponse(status: number, obj: unknown): Response {
  return new Response(JSON.stringify(obj), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

function bytesOf(tag: string): Uint8Array {
  const data = new TextEncoder().encode(`PNGBYTES:${tag}`);
  return data;
}

interface MockJob {
  kind: 'latent_opt' | 'adapt';
  polls: number;
  script: number[];
  losses: number[];
  result: Record<string, unknown>;
}

export class MockService {
  /** Raw request log: every call the UI makes goes through here. */
  requests: { method: string; path: string; body?: unknown }[] = [];
  images = new Map<string, Uint8Array>();
  /** Raw progress sequence returned poll by poll (may be non-monotone
   *  to exercise the UI's monotone rendering). */
  adaptProgressScript = [0.2, 0.5, 0.4, 0.8, 1.0];
  invertProgressScript = [0.5, 1.0];
  editDelay: Promise<void> | null = null;

  private sessions = new Set<string>();
  private jobs = new Map<string, MockJob>();
  private uploaded = new Set<string>();
  private inverted = new Set<string>();
  private adaptedSessions = new Set<string>();
  private nextSession = 1;
  private nextJob = 1;

  constructor() {
    this.putImage('recon-base', bytesOf('recon-base'));
    this.putImage('recon-adapted', bytesOf('recon-adapted'));
  }

  putImage(id: string, data: Uint8Array): string {
    this.images.set(id, data);
    return `/api/v1/images/${id}`;
  }

  /** Count of requests matching a method/path prefix. */
  count(method: string, pathPrefix: string): number {
    return this.requests.filter(
      (r) => r.method === method && r.path.startsWith(pathPrefix)).length;
  }

  fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? 'GET';
    const path = url.replace(/^https?:\/\/[^/]+/, '');
    let body: unknown;
    if (typeof init?.body === 'string') {
      body = JSON.parse(init.body);
    }
    this.requests.push({ method, path, body });
    return this.route(method, path, body);
  };

  private route(method: string, path: string, body: any): Response {
    let m: RegExpMatchArray | null;

    if (method === 'POST' && path === '/api/v1/sessions') {
      const sid = `s${this.nextSession++}`;
      this.sessions.add(sid);
      return jsonResponse(201, { session_id: sid });
    }
    if ((m = path.match(/^\/api\/v1\/sessions\/([^/]+)\/image$/)) && method === 'PUT') {
      if (!this.sessions.has(m[1])) return jsonResponse(404, { error: 'unknown session' });
      this.uploaded.add(m[1]);
      return jsonResponse(200, { image_url: this.putImage(`input-${m[1]}`, bytesOf(`input-${m[1]}`)) });
    }
    if ((m = path.match(/^\/api\/v1\/sessions\/([^/]+)\/invert$/)) && method === 'POST') {
      if (!this.sessions.has(m[1])) return jsonResponse(404, { error: 'unknown session' });
      const sid = m[1];
      const methodName = body?.method ?? 'encoder';
      if (methodName !== 'random' && !this.uploaded.has(sid)) {
        return jsonResponse(409, { error: 'upload an image before inverting' });
      }
      if (methodName === 'latent_opt') {
        const jobId = `j${this.nextJob++}`;
        this.jobs.set(jobId, {
          kind: 'latent_opt', polls: 0, script: this.invertProgressScript,
          losses: [0.5, 0.2],
          result: { latent_id: 'lat-opt', recon_image_url: '/api/v1/images/recon-base' },
        });
        this.inverted.add(sid);
        return jsonResponse(202, { job_id: jobId });
      }
      this.inverted.add(sid);
      const latent = methodName === 'random' ? `lat-rnd-${body?.seed ?? 0}` : 'lat-enc';
      return jsonResponse(200, { latent_id: latent, recon_image_url: '/api/v1/images/recon-base' });
    }
    if ((m = path.match(/^\/api\/v1\/sessions\/([^/]+)\/adapt$/)) && method === 'POST') {
      const sid = m[1];
      if (!this.sessions.has(sid)) return jsonResponse(404, { error: 'unknown session' });
      if (!this.inverted.has(sid)) return jsonResponse(409, { error: 'invert before adapting' });
      const jobId = `j${this.nextJob++}`;
      this.jobs.set(jobId, {
        kind: 'adapt', polls: 0, script: this.adaptProgressScript,
        losses: [0.4, 0.3, 0.22, 0.18, 0.15],
        result: { recon_image_url: '/api/v1/images/recon-adapted', final_loss: 0.15 },
      });
      this.adaptedSessions.add(sid);
      return jsonResponse(202, { job_id: jobId });
    }
    if ((m = path.match(/^\/api\/v1\/jobs\/([^/]+)$/)) && method === 'GET') {
      const job = this.jobs.get(m[1]);
      if (!job) return jsonResponse(404, { error: 'unknown job' });
      job.polls += 1;
      const i = Math.min(job.polls - 1, job.script.length - 1);
      const doneAt = job.script.length;
      const done = job.polls >= doneAt;
      return jsonResponse(200, {
        job_id: m[1], kind: job.kind,
        status: done ? 'done' : 'running',
        progress: job.script[i],
        loss_curve: job.losses.slice(0, Math.min(job.polls, job.losses.length)),
        ...(done ? { result: job.result } : {}),
      });
    }
    if (method === 'GET' && path === '/api/v1/attributes') {
      return jsonResponse(200, [
        { name: 'age', train_accuracy: 0.97 },
        { name: 'smile', train_accuracy: 0.99 },
        { name: 'hair', train_accuracy: 0.98 },
      ]);
    }
    if ((m = path.match(/^\/api\/v1\/sessions\/([^/]+)\/edit$/)) && method === 'POST') {
      const sid = m[1];
      if (!this.sessions.has(sid)) return jsonResponse(404, { error: 'unknown session' });
      const { attribute, alpha, use_base: useBase } = body ?? {};
      if (!['age', 'smile', 'hair'].includes(attribute)) {
        return jsonResponse(422, { error: `unknown attribute ${attribute}` });
      }
      if (!this.adaptedSessions.has(sid) && !useBase) {
        return jsonResponse(409, { error: 'adapt first, or pass use_base=true' });
      }
      if (alpha === 0 && this.adaptedSessions.has(sid)) {
        // content addressing: identical pixels, identical URL
        return jsonResponse(200, { image_url: '/api/v1/images/recon-adapted', alpha, attribute });
      }
      const id = `edit-${attribute}-${alpha}`;
      return jsonResponse(200, { image_url: this.putImage(id, bytesOf(id)), alpha, attribute });
    }
    if ((m = path.match(/^\/api\/v1\/images\/([^/]+)$/)) && method === 'GET') {
      const data = this.images.get(m[1]);
      if (!data) return jsonResponse(404, { error: 'unknown image' });
      return new Response(data.slice().buffer as ArrayBuffer, {
        status: 200, headers: { 'Content-Type': 'image/png' },
      });
    }
    return jsonResponse(404, { error: `no route for ${method} ${path}` });
  }
}

/**
 * Typed client for the editing service's HTTP API.
 *
 * The fetch implementation is injectable so tests can run against a
 * scripted mock service without a network.
 */

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface AttributeInfo {
  name: string;
  train_accuracy: number;
}

export interface InvertSync {
  kind: 'sync';
  latentId: string;
  reconImageUrl: string;
}

export interface InvertJob {
  kind: 'job';
  jobId: string;
}

export type JobStatus = 'queued' | 'running' | 'done' | 'failed';

export interface JobSnapshot {
  job_id: string;
  kind: string;
  status: JobStatus;
  progress: number;
  loss_curve: number[];
  error?: string;
  result?: { latent_id?: string; recon_image_url?: string; final_loss?: number };
}

export interface EditResponse {
  image_url: string;
  alpha: number;
  attribute: string;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  /** Absolute URL for a service-relative path such as /api/v1/images/{id}. */
  resolve(path: string): string {
    return this.baseUrl + path;
  }

  private async request<T>(method: string, path: string, body?: unknown,
                           contentType = 'application/json'): Promise<T> {
    const init: RequestInit = { method, headers: { 'Content-Type': contentType } };
    if (body !== undefined) {
      init.body = body instanceof ArrayBuffer || body instanceof Uint8Array
        ? (body as BodyInit)
        : JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const text = await resp.text();
    let payload: any = null;
    try {
      payload = text ? JSON.parse(text) : null;
    } catch {
      payload = null;
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, payload?.error ?? `HTTP ${resp.status}`);
    }
    return payload as T;
  }

  async createSession(): Promise<string> {
    const obj = await this.request<{ session_id: string }>('POST', '/api/v1/sessions');
    return obj.session_id;
  }

  async uploadImage(sessionId: string, png: ArrayBuffer | Uint8Array): Promise<string> {
    const obj = await this.request<{ image_url: string }>(
      'PUT', `/api/v1/sessions/${sessionId}/image`, png, 'image/png');
    return obj.image_url;
  }

  async invert(sessionId: string,
               req: { method: 'encoder' | 'latent_opt' | 'random'; seed?: number; steps?: number },
  ): Promise<InvertSync | InvertJob> {
    const obj = await this.request<any>('POST', `/api/v1/sessions/${sessionId}/invert`, req);
    if (obj.job_id) {
      return { kind: 'job', jobId: obj.job_id };
    }
    return { kind: 'sync', latentId: obj.latent_id, reconImageUrl: obj.recon_image_url };
  }

  async adapt(sessionId: string,
              params: { steps?: number; lambda_mse?: number; lambda_vgg?: number } = {},
  ): Promise<string> {
    const obj = await this.request<{ job_id: string }>(
      'POST', `/api/v1/sessions/${sessionId}/adapt`, params);
    return obj.job_id;
  }

  async getJob(jobId: string): Promise<JobSnapshot> {
    return this.request<JobSnapshot>('GET', `/api/v1/jobs/${jobId}`);
  }

  /**
   * Poll a job until it reaches a terminal state. Calls onSnapshot with
   * every poll result; resolves with the final snapshot, rejects if the
   * job failed.
   */
  async pollJob(jobId: string, onSnapshot?: (s: JobSnapshot) => void,
                intervalMs = 1000,
                sleep: (ms: number) => Promise<void> = defaultSleep,
  ): Promise<JobSnapshot> {
    for (;;) {
      const snap = await this.getJob(jobId);
      onSnapshot?.(snap);
      if (snap.status === 'done') {
        return snap;
      }
      if (snap.status === 'failed') {
        throw new ApiError(500, snap.error ?? 'job failed');
      }
      await sleep(intervalMs);
    }
  }

  async attributes(): Promise<AttributeInfo[]> {
    return this.request<AttributeInfo[]>('GET', '/api/v1/attributes');
  }

  async edit(sessionId: string, attribute: string, alpha: number,
             useBase = false): Promise<EditResponse> {
    return this.request<EditResponse>('POST', `/api/v1/sessions/${sessionId}/edit`,
      { attribute, alpha, use_base: useBase });
  }

  async fetchImage(url: string): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(this.resolve(url), { method: 'GET' });
    if (!resp.ok) {
      throw new ApiError(resp.status, `image fetch failed: HTTP ${resp.status}`);
    }
    return resp.arrayBuffer();
  }
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

import { ConnectionError, ServerError } from './errors.js';

export interface ClientConfig {
  server: string; // base address, e.g. http://127.0.0.1:8080
  method: string;
  ensembling: boolean; // explicit, no default: disclosure is mandatory
  timeoutSeconds?: number;
}

export interface SubmissionRecord {
  id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  report?: string;
  failure?: string;
}

// Poll delays: 1 s start, doubling, capped at 30 s.
export function backoffDelayMs(attempt: number): number {
  return Math.min(1000 * 2 ** attempt, 30_000);
}

function apiUrl(config: ClientConfig, suffix: string): string {
  return `${config.server.replace(/\/$/, '')}/api/v1${suffix}`;
}

async function fetchOrConnectionError(url: string, init?: RequestInit): Promise<Response> {
  try {
    return await fetch(url, init);
  } catch (err) {
    throw new ConnectionError(`cannot reach ${url}: ${err}`);
  }
}

async function errorFromResponse(resp: Response): Promise<ServerError> {
  let code = 'HTTP_ERROR';
  let detail = resp.statusText;
  try {
    const doc = await resp.json();
    if (doc && typeof doc.error === 'string') {
      code = doc.error;
      detail = doc.detail ?? detail;
    }
  } catch {
    // non-JSON body; keep the status text
  }
  return new ServerError(code, resp.status, detail);
}

export async function submitArchive(
  config: ClientConfig,
  archive: Buffer,
): Promise<SubmissionRecord> {
  const form = new FormData();
  form.append('archive', new Blob([new Uint8Array(archive)]), 'results.zip');
  form.append(
    'metadata',
    new Blob([JSON.stringify({ method: config.method, ensembling: config.ensembling })]),
    'metadata.json',
  );
  const resp = await fetchOrConnectionError(apiUrl(config, '/submissions'), {
    method: 'POST',
    body: form,
  });
  if (resp.status !== 200 && resp.status !== 201) {
    throw await errorFromResponse(resp);
  }
  return (await resp.json()) as SubmissionRecord;
}

export async function getStatus(config: ClientConfig, id: string): Promise<SubmissionRecord> {
  const resp = await fetchOrConnectionError(apiUrl(config, `/submissions/${id}`));
  if (!resp.ok) {
    throw await errorFromResponse(resp);
  }
  return (await resp.json()) as SubmissionRecord;
}

/**
 * Upload an archive and poll until the evaluation finishes.
 *
 * Returns the plain-text report; a failed evaluation or a rejected
 * submission surfaces as ServerError carrying the server's code.
 */
export async function uploadAndWait(config: ClientConfig, archive: Buffer): Promise<string> {
  const timeoutMs = (config.timeoutSeconds ?? 600) * 1000;
  const record = await submitArchive(config, archive);
  const deadline = Date.now() + timeoutMs;
  let current = record;
  let attempt = 0;
  while (current.state === 'queued' || current.state === 'running') {
    if (Date.now() > deadline) {
      throw new ConnectionError(`timed out after ${config.timeoutSeconds ?? 600} s waiting for ${record.id}`);
    }
    await new Promise((resolve) => setTimeout(resolve, backoffDelayMs(attempt)));
    attempt += 1;
    current = await getStatus(config, record.id);
  }
  if (current.state === 'failed') {
    throw new ServerError('EVALUATION_FAILED', 200, current.failure ?? 'unknown failure');
  }
  if (!current.report) {
    throw new ServerError('EVALUATION_FAILED', 200, 'done record carries no report');
  }
  return current.report;
}

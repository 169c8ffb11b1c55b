// Typed client for the annotation service. Every mask and box the UI shows
// comes from these responses; nothing is fabricated client-side.

import type {
  ApiErrorPayload,
  BackendList,
  JobState,
  ObjectPrompts,
  PromptResponse,
  SessionInfo,
  SessionSummary,
} from './types';

export class ApiError extends Error {
  code: string;
  details?: unknown;

  constructor(payload: ApiErrorPayload) {
    super(payload.message);
    this.code = payload.code;
    this.details = payload.details;
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let payload: ApiErrorPayload = { code: 'error', message: response.statusText };
  try {
    const body = (await response.json()) as { error?: ApiErrorPayload };
    if (body.error) payload = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(payload);
}

export class AnnotationApi {
  constructor(private baseUrl: string = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async uploadVideo(file: Blob, filename: string, classes: string[]): Promise<SessionInfo> {
    const form = new FormData();
    form.append('file', file, filename);
    form.append('classes', JSON.stringify(classes));
    return unwrap(await fetch(this.url('/videos'), { method: 'POST', body: form }));
  }

  async summary(sessionId: string): Promise<SessionSummary> {
    return unwrap(await fetch(this.url(`/sessions/${sessionId}`)));
  }

  frameUrl(sessionId: string, index: number): string {
    return this.url(`/sessions/${sessionId}/frames/${index}`);
  }

  previewUrl(sessionId: string, index: number): string {
    return this.url(`/sessions/${sessionId}/previews/${index}`);
  }

  async submitPrompts(
    sessionId: string,
    frameIndex: number,
    objects: ObjectPrompts[],
  ): Promise<PromptResponse> {
    const response = await fetch(this.url(`/sessions/${sessionId}/prompts`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ frame_index: frameIndex, objects }),
    });
    return unwrap(response);
  }

  async startTrack(sessionId: string, segmentStart: number): Promise<string> {
    const response = await fetch(this.url(`/sessions/${sessionId}/track`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ segment_start: segmentStart }),
    });
    const doc = await unwrap<{ job_id: string }>(response);
    return doc.job_id;
  }

  async jobState(jobId: string): Promise<JobState> {
    return unwrap(await fetch(this.url(`/jobs/${jobId}`)));
  }

  async cancelJob(jobId: string): Promise<JobState> {
    return unwrap(await fetch(this.url(`/jobs/${jobId}/cancel`), { method: 'POST' }));
  }

  async submitCorrection(
    sessionId: string,
    frameIndex: number,
    objects: ObjectPrompts[],
  ): Promise<{ frame_index: number; resumed_through: number }> {
    const response = await fetch(this.url(`/sessions/${sessionId}/corrections`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ frame_index: frameIndex, objects }),
    });
    return unwrap(response);
  }

  async exportDataset(sessionId: string): Promise<Blob> {
    const response = await fetch(this.url(`/sessions/${sessionId}/export`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({}),
    });
    if (!response.ok) {
      return unwrap(response); // throws with the service error code
    }
    return response.blob();
  }

  async backends(): Promise<BackendList> {
    return unwrap(await fetch(this.url('/backends')));
  }
}

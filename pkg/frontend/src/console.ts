// Tracking console: starts and cancels propagation jobs and polls progress.
// Injected timer hooks keep it testable without real delays.

import type { AnnotationApi } from './api';
import type { JobState } from './types';

export interface ConsoleHooks {
  onUpdate: (job: JobState) => void;
  onSettled: (job: JobState) => void;
  pollIntervalMs?: number;
}

export class TrackingConsole {
  private jobId: string | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private api: AnnotationApi, private hooks: ConsoleHooks) {}

  get running(): boolean {
    return this.timer !== null;
  }

  async start(sessionId: string, segmentStart: number): Promise<string> {
    if (this.running) throw new Error('a tracking job is already being watched');
    this.jobId = await this.api.startTrack(sessionId, segmentStart);
    this.watch();
    return this.jobId;
  }

  async cancel(): Promise<void> {
    if (this.jobId) {
      await this.api.cancelJob(this.jobId);
    }
  }

  private watch(): void {
    const interval = this.hooks.pollIntervalMs ?? 250;
    this.timer = setInterval(async () => {
      if (!this.jobId) return;
      let job: JobState;
      try {
        job = await this.api.jobState(this.jobId);
      } catch {
        return; // transient poll failure; next tick retries
      }
      this.hooks.onUpdate(job);
      if (job.status === 'done' || job.status === 'error' || job.status === 'cancelled') {
        this.stop();
        this.hooks.onSettled(job);
      }
    }, interval);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.jobId = null;
  }
}

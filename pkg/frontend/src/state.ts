// Client-side session state. It mirrors the server after every acknowledged
// mutation; the only purely local data are pending prompts, which the canvas
// draws in a distinct style until the server's mask response confirms them.

import type {
  JobState,
  LabelClass,
  NormalizedBox,
  NormalizedPoint,
  ObjectPrompts,
  PromptResponse,
  SegmentInfo,
} from './types';

export interface PendingPrompts {
  points: NormalizedPoint[];
  boxes: NormalizedBox[];
}

export class UiSessionState {
  sessionId: string | null = null;
  nativeWidth = 0;
  nativeHeight = 0;
  frameCount = 0;
  currentFrame = 0;
  classes: LabelClass[] = [];
  segments: SegmentInfo[] = [];
  trackedFrames = 0;

  currentObjectId = 1;
  objectClasses = new Map<number, number>();
  pending = new Map<number, PendingPrompts>();
  lastPreview: PromptResponse | null = null;
  job: JobState | null = null;

  reset(): void {
    this.sessionId = null;
    this.pending.clear();
    this.objectClasses.clear();
    this.lastPreview = null;
    this.job = null;
    this.currentFrame = 0;
    this.currentObjectId = 1;
  }

  pendingFor(objectId: number): PendingPrompts {
    let entry = this.pending.get(objectId);
    if (!entry) {
      entry = { points: [], boxes: [] };
      this.pending.set(objectId, entry);
    }
    return entry;
  }

  addPoint(objectId: number, point: NormalizedPoint): void {
    this.pendingFor(objectId).points.push(point);
  }

  addBox(objectId: number, box: NormalizedBox): void {
    this.pendingFor(objectId).boxes.push(box);
  }

  clearPending(objectId?: number): void {
    if (objectId === undefined) {
      this.pending.clear();
    } else {
      this.pending.delete(objectId);
    }
  }

  /** Prompt payload for every object that has hints, with class assignments. */
  promptPayload(): ObjectPrompts[] {
    const payload: ObjectPrompts[] = [];
    for (const [objectId, entry] of [...this.pending.entries()].sort((a, b) => a[0] - b[0])) {
      if (!entry.points.length && !entry.boxes.length) continue;
      payload.push({
        object_id: objectId,
        class_id: this.objectClasses.get(objectId) ?? 0,
        points: entry.points,
        boxes: entry.boxes,
      });
    }
    return payload;
  }

  segmentContaining(frame: number): SegmentInfo | undefined {
    return this.segments.find((s) => s.start <= frame && frame < s.end);
  }
}

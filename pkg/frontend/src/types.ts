// Wire types mirroring the annotation service's JSON payloads.

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
  frame_count: number;
  fps: number;
}

export interface LabelClass {
  class_id: number;
  name: string;
}

export interface SegmentInfo {
  start: number;
  end: number;
  seed_frame: number;
  status: 'pending' | 'tracked';
}

export interface SessionSummary {
  session_id: string;
  source: { width: number; height: number; frame_count: number; fps: number };
  classes: LabelClass[];
  segment_count: number;
  segments: SegmentInfo[];
  tracked_frames: number;
  objects_per_class: Record<string, number>;
}

export interface NormalizedPoint {
  x: number;
  y: number;
  polarity: 'positive' | 'negative';
}

export interface NormalizedBox {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface ObjectPrompts {
  object_id: number;
  class_id: number | null;
  points: NormalizedPoint[];
  boxes: NormalizedBox[];
}

export interface Rle {
  size: [number, number]; // [height, width]
  counts: number[];
}

export interface MaskObject {
  object_id: number;
  class_id: number | null;
  box: [number, number, number, number] | null;
  rle: Rle | null;
}

export interface PromptResponse {
  frame_index: number;
  overlay_png: string; // base64
  mask_png: string; // base64, 16-bit label image
  objects: MaskObject[];
}

export interface JobState {
  job_id: string;
  status: 'queued' | 'running' | 'done' | 'error' | 'cancelled';
  progress: number;
  result: {
    start: number;
    end: number;
    processed: number;
    truncated: boolean;
    cancelled: boolean;
  } | null;
  error: { code: string; message: string } | null;
}

export interface BackendList {
  segmenters: { name: string; supported_prompts: string[] }[];
  trackers: { name: string; supports_reseed: boolean }[];
}

export interface ApiErrorPayload {
  code: string;
  message: string;
  details?: unknown;
}

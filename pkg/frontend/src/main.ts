// Application wiring: upload, scrub, prompt, track, correct, export.

import { AnnotationApi, ApiError } from './api';
import { TrackingConsole } from './console';
import { objectColorCss } from './palette';
import { PromptCanvas } from './promptCanvas';
import { UiSessionState } from './state';
import type { JobState } from './types';

const api = new AnnotationApi('');
const state = new UiSessionState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const frameImage = el<HTMLImageElement>('frame');
const overlayCanvas = el<HTMLCanvasElement>('overlay');
const statusLine = el<HTMLDivElement>('status');
const scrubber = el<HTMLInputElement>('scrubber');
const frameLabel = el<HTMLSpanElement>('frame-label');
const progressBar = el<HTMLProgressElement>('progress');
const objectList = el<HTMLDivElement>('objects');
const zoomSelect = el<HTMLSelectElement>('zoom');

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? 'status error' : 'status';
}

function reportError(err: unknown): void {
  if (err instanceof ApiError) {
    setStatus(`${err.code}: ${err.message}`, true);
  } else {
    setStatus(String(err), true);
  }
}

const promptCanvas = new PromptCanvas(overlayCanvas, state, {
  onPrompt: () => void submitPrompts(),
});

const trackingConsole = new TrackingConsole(api, {
  onUpdate: (job: JobState) => {
    progressBar.value = job.progress;
    setStatus(`tracking: ${(job.progress * 100).toFixed(0)}%`);
  },
  onSettled: async (job: JobState) => {
    state.job = job;
    if (job.status === 'done' && job.result) {
      const note = job.result.truncated ? ' (truncated at the frame limit)' : '';
      setStatus(`tracked ${job.result.processed} frames${note}`);
    } else if (job.status === 'cancelled') {
      setStatus('tracking cancelled; segment back to pending');
    } else if (job.error) {
      setStatus(`${job.error.code}: ${job.error.message}`, true);
    }
    await refreshSummary();
    await showFrame(state.currentFrame);
  },
});

async function refreshSummary(): Promise<void> {
  if (!state.sessionId) return;
  const summary = await api.summary(state.sessionId);
  state.segments = summary.segments;
  state.trackedFrames = summary.tracked_frames;
  state.classes = summary.classes;
  renderObjectSidebar();
}

function applyZoom(): void {
  const scale = Number(zoomSelect.value);
  const w = Math.round(state.nativeWidth * scale);
  const h = Math.round(state.nativeHeight * scale);
  frameImage.style.width = `${w}px`;
  frameImage.style.height = `${h}px`;
  overlayCanvas.style.width = `${w}px`;
  overlayCanvas.style.height = `${h}px`;
  overlayCanvas.width = state.nativeWidth;
  overlayCanvas.height = state.nativeHeight;
  promptCanvas.redraw();
}

async function showFrame(index: number): Promise<void> {
  if (!state.sessionId) return;
  state.currentFrame = index;
  frameLabel.textContent = `frame ${index} / ${state.frameCount - 1}`;
  // Prefer the stored-mask preview; fall back to the bare frame.
  const preview = await fetch(api.previewUrl(state.sessionId, index));
  if (preview.ok) {
    frameImage.src = URL.createObjectURL(await preview.blob());
  } else {
    frameImage.src = api.frameUrl(state.sessionId, index);
  }
  promptCanvas.setOverlay(null);
}

async function submitPrompts(): Promise<void> {
  if (!state.sessionId) return;
  const payload = state.promptPayload();
  if (!payload.length) return;
  try {
    const response = await api.submitPrompts(state.sessionId, state.currentFrame, payload);
    state.lastPreview = response;
    state.clearPending();
    promptCanvas.setOverlay(response.overlay_png);
    const present = response.objects.filter((o) => o.rle !== null).length;
    setStatus(`mask preview: ${present} object(s) on frame ${response.frame_index}`);
    await refreshSummary();
  } catch (err) {
    state.clearPending();
    promptCanvas.redraw();
    reportError(err);
  }
}

function renderObjectSidebar(): void {
  objectList.innerHTML = '';
  const ids = new Set<number>([state.currentObjectId, ...state.objectClasses.keys()]);
  for (const id of [...ids].sort((a, b) => a - b)) {
    const row = document.createElement('div');
    row.className = 'object-row' + (id === state.currentObjectId ? ' active' : '');
    const swatch = document.createElement('span');
    swatch.className = 'swatch';
    swatch.style.background = objectColorCss(id);
    row.appendChild(swatch);
    const label = document.createElement('span');
    label.textContent = `object ${id}`;
    row.appendChild(label);
    const select = document.createElement('select');
    for (const cls of state.classes) {
      const option = document.createElement('option');
      option.value = String(cls.class_id);
      option.textContent = cls.name;
      option.selected = (state.objectClasses.get(id) ?? 0) === cls.class_id;
      select.appendChild(option);
    }
    select.addEventListener('change', () => {
      state.objectClasses.set(id, Number(select.value));
    });
    row.appendChild(select);
    row.addEventListener('click', () => {
      state.currentObjectId = id;
      renderObjectSidebar();
    });
    objectList.appendChild(row);
  }
}

async function handleUpload(event: Event): Promise<void> {
  event.preventDefault();
  const fileInput = el<HTMLInputElement>('video-file');
  const classesInput = el<HTMLInputElement>('classes');
  const file = fileInput.files?.[0];
  if (!file) {
    setStatus('choose a video or frame-zip first', true);
    return;
  }
  const classes = classesInput.value
    .split(',')
    .map((s) => s.trim())
    .filter(Boolean);
  try {
    const info = await api.uploadVideo(file, file.name, classes.length ? classes : ['object']);
    state.reset();
    state.sessionId = info.session_id;
    state.nativeWidth = info.width;
    state.nativeHeight = info.height;
    state.frameCount = info.frame_count;
    state.objectClasses.set(1, 0);
    scrubber.max = String(info.frame_count - 1);
    scrubber.value = '0';
    applyZoom();
    await refreshSummary();
    await showFrame(0);
    setStatus(`session ${info.session_id}: ${info.frame_count} frames`);
  } catch (err) {
    reportError(err);
  }
}

async function handleTrack(): Promise<void> {
  if (!state.sessionId) return;
  const segment = state.segmentContaining(state.currentFrame) ?? state.segments[0];
  if (!segment) {
    setStatus('prompt a frame first to create a segment', true);
    return;
  }
  try {
    await trackingConsole.start(state.sessionId, segment.start);
    setStatus('tracking started');
  } catch (err) {
    reportError(err);
  }
}

async function handleCorrect(): Promise<void> {
  if (!state.sessionId) return;
  const payload = state.promptPayload();
  if (!payload.length) {
    setStatus('add correction prompts on this frame first', true);
    return;
  }
  try {
    const result = await api.submitCorrection(state.sessionId, state.currentFrame, payload);
    state.clearPending();
    setStatus(`corrected frame ${result.frame_index}, re-propagated through ${result.resumed_through}`);
    await showFrame(state.currentFrame);
  } catch (err) {
    reportError(err);
  }
}

async function handleExport(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const blob = await api.exportDataset(state.sessionId);
    const link = document.createElement('a');
    link.href = URL.createObjectURL(blob);
    link.download = `${state.sessionId}-dataset.zip`;
    link.click();
    setStatus('dataset archive downloaded');
  } catch (err) {
    reportError(err);
  }
}

el<HTMLFormElement>('upload-form').addEventListener('submit', (e) => void handleUpload(e));
el<HTMLButtonElement>('track').addEventListener('click', () => void handleTrack());
el<HTMLButtonElement>('cancel').addEventListener('click', () => void trackingConsole.cancel());
el<HTMLButtonElement>('correct').addEventListener('click', () => void handleCorrect());
el<HTMLButtonElement>('export').addEventListener('click', () => void handleExport());
el<HTMLButtonElement>('add-object').addEventListener('click', () => {
  const next = Math.max(0, ...state.objectClasses.keys(), state.currentObjectId) + 1;
  state.currentObjectId = next;
  state.objectClasses.set(next, 0);
  renderObjectSidebar();
});
scrubber.addEventListener('input', () => void showFrame(Number(scrubber.value)));
zoomSelect.addEventListener('change', applyZoom);

setStatus('upload a video (or a zip of PNG frames) to begin');

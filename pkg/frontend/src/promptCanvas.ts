// The interactive layer over the frame image: converts pointer gestures into
// normalized prompts and draws markers plus the acknowledged mask overlay.
// Pending (unacknowledged) prompts render dashed/hollow; once the server
// responds, its overlay image replaces them as the source of truth.

import { dragToBox, nativePixelToDisplay, toNativePixel, toNormalized } from './coords';
import type { DisplayGeometry } from './coords';
import { GestureRecognizer } from './gesture';
import { objectColorCss } from './palette';
import type { UiSessionState } from './state';
import type { NormalizedBox, NormalizedPoint } from './types';

export interface PromptCanvasCallbacks {
  onPrompt: () => void; // fired after each completed gesture
}

export class PromptCanvas {
  private recognizer = new GestureRecognizer();
  private overlayImage: HTMLImageElement | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private state: UiSessionState,
    private callbacks: PromptCanvasCallbacks,
  ) {
    canvas.addEventListener('pointerdown', (e) => this.onDown(e));
    canvas.addEventListener('pointerup', (e) => this.onUp(e));
    canvas.addEventListener('contextmenu', (e) => e.preventDefault());
  }

  geometry(): DisplayGeometry {
    const rect = this.canvas.getBoundingClientRect();
    return {
      displayWidth: rect.width,
      displayHeight: rect.height,
      nativeWidth: this.state.nativeWidth,
      nativeHeight: this.state.nativeHeight,
    };
  }

  private localXY(e: PointerEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  private onDown(e: PointerEvent): void {
    if (!this.state.sessionId) return;
    const { x, y } = this.localXY(e);
    this.recognizer.begin({ x, y, shiftKey: e.shiftKey, altKey: e.altKey, ctrlKey: e.ctrlKey, button: e.button });
  }

  private onUp(e: PointerEvent): void {
    const { x, y } = this.localXY(e);
    const gesture = this.recognizer.end({
      x, y, shiftKey: e.shiftKey, altKey: e.altKey, ctrlKey: e.ctrlKey, button: e.button,
    });
    if (!gesture || !this.state.sessionId) return;
    const geometry = this.geometry();
    if (gesture.kind === 'point') {
      const n = toNormalized(gesture.x, gesture.y, geometry);
      const point: NormalizedPoint = { x: n.x, y: n.y, polarity: gesture.polarity };
      this.state.addPoint(this.state.currentObjectId, point);
    } else {
      const start = toNormalized(gesture.startX, gesture.startY, geometry);
      const end = toNormalized(gesture.endX, gesture.endY, geometry);
      const box: NormalizedBox = dragToBox(start, end);
      this.state.addBox(this.state.currentObjectId, box);
    }
    this.redraw();
    this.callbacks.onPrompt();
  }

  /** Install the acknowledged overlay (base64 PNG from the prompt response). */
  setOverlay(pngBase64: string | null, onReady?: () => void): void {
    if (!pngBase64) {
      this.overlayImage = null;
      this.redraw();
      return;
    }
    const image = new Image();
    image.onload = () => {
      this.overlayImage = image;
      this.redraw();
      onReady?.();
    };
    image.src = `data:image/png;base64,${pngBase64}`;
  }

  redraw(): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.overlayImage) {
      ctx.drawImage(this.overlayImage, 0, 0, this.canvas.width, this.canvas.height);
    }
    this.drawPendingMarkers(ctx);
  }

  private drawPendingMarkers(ctx: CanvasRenderingContext2D): void {
    const geometry = this.geometry();
    const scaleX = this.canvas.width / geometry.displayWidth;
    const scaleY = this.canvas.height / geometry.displayHeight;
    for (const [objectId, entry] of this.state.pending) {
      ctx.strokeStyle = objectColorCss(objectId);
      ctx.setLineDash([4, 3]); // dashed marks a prompt the server has not confirmed
      for (const p of entry.points) {
        const px = toNativePixel(p.x, geometry.nativeWidth);
        const py = toNativePixel(p.y, geometry.nativeHeight);
        const cx = nativePixelToDisplay(px, geometry.nativeWidth, geometry.displayWidth) * scaleX;
        const cy = nativePixelToDisplay(py, geometry.nativeHeight, geometry.displayHeight) * scaleY;
        ctx.beginPath();
        if (p.polarity === 'positive') {
          ctx.arc(cx, cy, 5, 0, Math.PI * 2);
        } else {
          ctx.moveTo(cx - 5, cy - 5);
          ctx.lineTo(cx + 5, cy + 5);
          ctx.moveTo(cx + 5, cy - 5);
          ctx.lineTo(cx - 5, cy + 5);
        }
        ctx.stroke();
      }
      for (const b of entry.boxes) {
        ctx.strokeRect(
          b.x0 * this.canvas.width,
          b.y0 * this.canvas.height,
          (b.x1 - b.x0) * this.canvas.width,
          (b.y1 - b.y0) * this.canvas.height,
        );
      }
    }
    ctx.setLineDash([]);
  }
}

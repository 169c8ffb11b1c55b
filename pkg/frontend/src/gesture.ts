// Pointer-gesture classification for the prompt canvas. Kept free of DOM
// types so the rules are unit-testable: a press-release within the drag
// threshold is a point (negative with a modifier key or secondary button),
// anything longer is a box.

export interface PointerSample {
  x: number; // display-space px relative to the canvas
  y: number;
  shiftKey?: boolean;
  altKey?: boolean;
  ctrlKey?: boolean;
  button?: number;
}

export type Gesture =
  | { kind: 'point'; x: number; y: number; polarity: 'positive' | 'negative' }
  | { kind: 'box'; startX: number; startY: number; endX: number; endY: number };

export const DRAG_THRESHOLD_PX = 4;

function isNegative(sample: PointerSample): boolean {
  return Boolean(sample.shiftKey || sample.altKey || sample.ctrlKey || sample.button === 2);
}

export class GestureRecognizer {
  private start: PointerSample | null = null;

  constructor(private dragThresholdPx: number = DRAG_THRESHOLD_PX) {}

  begin(sample: PointerSample): void {
    this.start = sample;
  }

  /** Completes the gesture; returns null if begin was never called. */
  end(sample: PointerSample): Gesture | null {
    const start = this.start;
    this.start = null;
    if (!start) return null;
    const dx = sample.x - start.x;
    const dy = sample.y - start.y;
    if (Math.hypot(dx, dy) < this.dragThresholdPx) {
      return {
        kind: 'point',
        x: start.x,
        y: start.y,
        polarity: isNegative(start) || isNegative(sample) ? 'negative' : 'positive',
      };
    }
    return {
      kind: 'box',
      startX: start.x,
      startY: start.y,
      endX: sample.x,
      endY: sample.y,
    };
  }

  get active(): boolean {
    return this.start !== null;
  }
}

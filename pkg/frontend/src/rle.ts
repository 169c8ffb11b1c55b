// Run-length decoding for the compact per-object masks the prompt route
// returns: row-major runs of alternating background/object lengths, starting
// with background.

import type { Rle } from './types';

export function decodeRle(rle: Rle): Uint8Array {
  const [height, width] = rle.size;
  const mask = new Uint8Array(height * width);
  let position = 0;
  let value = 0;
  for (const count of rle.counts) {
    if (value === 1) {
      mask.fill(1, position, position + count);
    }
    position += count;
    value ^= 1;
  }
  if (position !== height * width) {
    throw new Error(`rle covers ${position} pixels, mask has ${height * width}`);
  }
  return mask;
}

export function rlePixelCount(rle: Rle): number {
  let total = 0;
  let value = 0;
  for (const count of rle.counts) {
    if (value === 1) total += count;
    value ^= 1;
  }
  return total;
}

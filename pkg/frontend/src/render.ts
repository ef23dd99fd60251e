/**
 * Fixed colormap, mirroring the service-side renderer: black background,
 * learnable channel in amber, obstacles in blue, attractor in cyan,
 * composited additively and clipped.
 */

import { Frame, channelView } from "./protocol.js";

export const CHANNEL_COLORS: ReadonlyArray<readonly [number, number, number]> = [
  [255, 202, 56],
  [64, 110, 255],
  [64, 224, 224],
];

/** Fill an RGBA buffer (length 4*H*W) from a decoded frame. */
export function paintFrame(frame: Frame, rgba: Uint8ClampedArray): void {
  const plane = frame.height * frame.width;
  rgba.fill(0);
  for (let i = 0; i < plane; i++) rgba[4 * i + 3] = 255;
  const nc = Math.min(frame.channels, CHANNEL_COLORS.length);
  for (let c = 0; c < nc; c++) {
    const [cr, cg, cb] = CHANNEL_COLORS[c];
    const values = channelView(frame, c);
    for (let i = 0; i < plane; i++) {
      const v = values[i];
      if (v <= 0) continue;
      rgba[4 * i] = Math.min(255, rgba[4 * i] + v * cr);
      rgba[4 * i + 1] = Math.min(255, rgba[4 * i + 1] + v * cg);
      rgba[4 * i + 2] = Math.min(255, rgba[4 * i + 2] + v * cb);
    }
  }
}

import { describe, expect, it } from "vitest";

import { Frame } from "../src/protocol.js";
import { CHANNEL_COLORS, paintFrame } from "../src/render.js";

function frameOf(channels: number[][][]): Frame {
  const c = channels.length;
  const h = channels[0].length;
  const w = channels[0][0].length;
  const data = new Float32Array(c * h * w);
  let i = 0;
  for (const plane of channels) {
    for (const row of plane) for (const v of row) data[i++] = v;
  }
  return { step: 0, channels: c, height: h, width: w, data };
}

describe("canvas colormap", () => {
  it("paints each channel in its fixed color", () => {
    const frame = frameOf([
      [[1, 0], [0, 0]],
      [[0, 1], [0, 0]],
      [[0, 0], [1, 0]],
    ]);
    const rgba = new Uint8ClampedArray(4 * 4);
    paintFrame(frame, rgba);
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([...CHANNEL_COLORS[0]]);
    expect([rgba[4], rgba[5], rgba[6]]).toEqual([...CHANNEL_COLORS[1]]);
    expect([rgba[8], rgba[9], rgba[10]]).toEqual([...CHANNEL_COLORS[2]]);
    // empty cell stays background, fully opaque
    expect([rgba[12], rgba[13], rgba[14], rgba[15]]).toEqual([0, 0, 0, 255]);
  });

  it("empty grid paints a uniform background", () => {
    const frame = frameOf([[[0, 0], [0, 0]]]);
    const rgba = new Uint8ClampedArray(4 * 4);
    rgba.fill(7);
    paintFrame(frame, rgba);
    for (let i = 0; i < 4; i++) {
      expect([rgba[4 * i], rgba[4 * i + 1], rgba[4 * i + 2]]).toEqual([0, 0, 0]);
    }
  });

  it("obstacle-only frame uses the obstacle ramp only", () => {
    const frame = frameOf([
      [[0, 0], [0, 0]],
      [[0.5, 0], [0, 0]],
    ]);
    const rgba = new Uint8ClampedArray(4 * 4);
    paintFrame(frame, rgba);
    expect(rgba[0]).toBe(Math.min(255, Math.round(0.5 * CHANNEL_COLORS[1][0])));
    expect(rgba[2]).toBe(Math.min(255, Math.round(0.5 * CHANNEL_COLORS[1][2])));
  });
});

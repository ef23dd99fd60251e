import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { FrameSequencer, SessionClient } from "../src/client.js";
import { Frame, decodeFrame } from "../src/protocol.js";

function goldenBuffer(): ArrayBuffer {
  const buf = readFileSync(join(__dirname, "fixtures", "golden_frame.bin"));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

function frameWithStep(step: number): Frame {
  return { step, channels: 1, height: 1, width: 1,
           data: new Float32Array([0]) };
}

describe("frame sequencing", () => {
  it("delivers strictly increasing step indices", () => {
    const seq = new FrameSequencer();
    expect(seq.accept(frameWithStep(1))?.step).toBe(1);
    expect(seq.accept(frameWithStep(5))?.step).toBe(5);
    expect(seq.accept(frameWithStep(5))).toBeNull();
    expect(seq.accept(frameWithStep(3))).toBeNull();
    expect(seq.accept(frameWithStep(6))?.step).toBe(6);
  });
});

describe("session client", () => {
  it("routes text to replies and binary to decoded frames", async () => {
    const frames: Frame[] = [];
    const replies: Record<string, unknown>[] = [];
    const client = new SessionClient("ws://x", {
      onFrame: (f) => frames.push(f),
      onReply: (r) => replies.push(r),
      scheduler: (work) => work(),  // synchronous for the test
    });
    client.handleMessage(JSON.stringify({ type: "created", session: "s1" }));
    client.handleMessage(goldenBuffer());
    expect(replies).toEqual([{ type: "created", session: "s1" }]);
    expect(frames.length).toBe(1);
    expect(frames[0].step).toBe(4242);
    const reference = decodeFrame(goldenBuffer());
    expect(frames[0].data).toEqual(reference.data);
  });

  it("drops stale frames instead of re-rendering them", () => {
    const frames: Frame[] = [];
    const client = new SessionClient("ws://x", {
      onFrame: (f) => frames.push(f),
      scheduler: (work) => work(),
    });
    client.handleMessage(goldenBuffer());
    client.handleMessage(goldenBuffer());  // same step again
    expect(frames.length).toBe(1);
  });

  it("refuses edits while disconnected", () => {
    const client = new SessionClient("ws://x", {});
    expect(client.sendEdit("s1", { kind: "pause" })).toBe(false);
  });
});

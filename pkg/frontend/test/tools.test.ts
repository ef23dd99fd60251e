import { describe, expect, it } from "vitest";

import { EditCommand } from "../src/protocol.js";
import { GestureTracker } from "../src/tools.js";

function drag(tracker: GestureTracker, from: [number, number],
              to: [number, number], steps = 100): EditCommand[] {
  const out = [...tracker.begin({ x: from[0], y: from[1] })];
  for (let i = 1; i <= steps; i++) {
    const t = i / steps;
    out.push(...tracker.move({ x: from[0] + (to[0] - from[0]) * t,
                               y: from[1] + (to[1] - from[1]) * t }));
  }
  out.push(...tracker.end());
  return out;
}

describe("tool gestures", () => {
  it("obstacle click emits one disk with the brush radius", () => {
    const tracker = new GestureTracker("obstacle", 10);
    const commands = tracker.begin({ x: 40, y: 50 });
    expect(commands).toEqual([
      { kind: "draw_obstacle", x: 40, y: 50, radius: 10 }]);
  });

  it("erase tool emits rectangles", () => {
    const tracker = new GestureTracker("erase", 4);
    const commands = tracker.begin({ x: 10, y: 20 });
    expect(commands).toEqual([
      { kind: "erase_mass", x0: 6, y0: 16, x1: 14, y1: 24 }]);
  });

  it("attractor drag emits at least L/4 move messages", () => {
    const tracker = new GestureTracker("attractor", 8);
    const L = 80;
    const commands = drag(tracker, [10, 10], [10 + L, 10]);
    const moves = commands.filter((c) => c.kind === "move_attractor");
    expect(moves.length).toBeGreaterThanOrEqual(L / 4);
    expect(commands[0].kind).toBe("place_attractor");
  });

  it("obstacle drag stamps disks along the path", () => {
    const tracker = new GestureTracker("obstacle", 6);
    const commands = drag(tracker, [0, 0], [60, 0]);
    const disks = commands.filter((c) => c.kind === "draw_obstacle");
    expect(disks.length).toBeGreaterThan(10);
  });

  it("spawn stamps the loaded pattern centered on the click", () => {
    const values = [[1, 1], [1, 1]];
    const tracker = new GestureTracker("spawn", 5, values);
    expect(tracker.begin({ x: 30, y: 40 })).toEqual([
      { kind: "spawn_init", x: 29, y: 39, values }]);
    // two clicks -> two stamps at the two positions
    expect(tracker.begin({ x: 80, y: 90 })).toEqual([
      { kind: "spawn_init", x: 79, y: 89, values }]);
  });

  it("spawn without a loaded pattern does nothing", () => {
    const tracker = new GestureTracker("spawn", 5, null);
    expect(tracker.begin({ x: 1, y: 1 })).toEqual([]);
  });
});

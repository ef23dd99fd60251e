/**
 * Pointer gestures -> edit command streams.
 *
 * All state changes round-trip through the server; the client never mutates
 * simulation state locally.  Drags emit throttled command streams: disks are
 * stamped whenever the pointer moves at least half a brush radius, and the
 * attractor re-targets every few cells of pointer travel (at least one
 * move_attractor per 4 cells of path length).
 */

import { EditCommand } from "./protocol.js";
import { Tool } from "./state.js";

export interface Point {
  x: number;
  y: number;
}

const ATTRACTOR_THROTTLE_CELLS = 3;

export class GestureTracker {
  private last: Point | null = null;
  private carried = 0;

  constructor(private tool: Tool, private brushRadius: number,
              private spawnValues: number[][] | null = null) {}

  /** Commands for a pointer-down at ``p`` (grid coordinates). */
  begin(p: Point): EditCommand[] {
    this.last = p;
    this.carried = 0;
    return this.stamp(p);
  }

  /** Commands for a pointer move while the button is held. */
  move(p: Point): EditCommand[] {
    if (this.last === null) return [];
    const dist = Math.hypot(p.x - this.last.x, p.y - this.last.y);
    const out: EditCommand[] = [];
    switch (this.tool) {
      case "obstacle":
      case "erase_obstacle":
      case "erase":
        if (dist >= Math.max(1, this.brushRadius / 2)) {
          out.push(...this.stamp(p));
          this.last = p;
        }
        break;
      case "attractor":
        this.carried += dist;
        if (this.carried >= ATTRACTOR_THROTTLE_CELLS) {
          out.push({ kind: "move_attractor", x: p.x, y: p.y,
                     radius: this.brushRadius });
          this.carried = 0;
        }
        this.last = p;
        break;
      case "spawn":
        this.last = p; // spawn stamps on click only
        break;
    }
    return out;
  }

  end(): EditCommand[] {
    this.last = null;
    this.carried = 0;
    return [];
  }

  private stamp(p: Point): EditCommand[] {
    const r = this.brushRadius;
    switch (this.tool) {
      case "obstacle":
        return [{ kind: "draw_obstacle", x: p.x, y: p.y, radius: r }];
      case "erase_obstacle":
        return [{ kind: "erase_obstacle", x: p.x, y: p.y, radius: r }];
      case "erase":
        return [{ kind: "erase_mass", x0: Math.floor(p.x - r),
                  y0: Math.floor(p.y - r), x1: Math.ceil(p.x + r),
                  y1: Math.ceil(p.y + r) }];
      case "attractor":
        return [{ kind: "place_attractor", x: p.x, y: p.y, radius: r }];
      case "spawn": {
        if (!this.spawnValues) return [];
        const h = this.spawnValues.length;
        const w = h ? this.spawnValues[0].length : 0;
        return [{ kind: "spawn_init", x: Math.round(p.x - h / 2),
                  y: Math.round(p.y - w / 2), values: this.spawnValues }];
      }
    }
  }
}

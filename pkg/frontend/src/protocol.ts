/**
 * Wire protocol shared with the session service.
 *
 * Binary frames: a 16-byte little-endian header
 *   magic "LENF" | flags u8 | reserved u8 | C u16 | H u16 | W u16 | step u32
 * followed by C*H*W float32 cell values, or uint8 (= round(v*255)) when
 * flags bit 0 is set.  Control messages are JSON text.
 */

export const FRAME_MAGIC = "LENF";
export const HEADER_SIZE = 16;
export const FLAG_U8 = 0x01;

export interface Frame {
  step: number;
  channels: number;
  height: number;
  width: number;
  /** Row-major [C][H][W] values in [0, 1]. */
  data: Float32Array;
}

export class FrameDecodeError extends Error {}

export function decodeFrame(buffer: ArrayBuffer): Frame {
  if (buffer.byteLength < HEADER_SIZE) {
    throw new FrameDecodeError(`short frame: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  const magic = String.fromCharCode(
    view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3));
  if (magic !== FRAME_MAGIC) {
    throw new FrameDecodeError(`bad magic ${JSON.stringify(magic)}`);
  }
  const flags = view.getUint8(4);
  const channels = view.getUint16(6, true);
  const height = view.getUint16(8, true);
  const width = view.getUint16(10, true);
  const step = view.getUint32(12, true);
  const n = channels * height * width;
  let data: Float32Array;
  if (flags & FLAG_U8) {
    if (buffer.byteLength !== HEADER_SIZE + n) {
      throw new FrameDecodeError("u8 payload size mismatch");
    }
    const raw = new Uint8Array(buffer, HEADER_SIZE, n);
    data = new Float32Array(n);
    for (let i = 0; i < n; i++) data[i] = raw[i] / 255;
  } else {
    if (buffer.byteLength !== HEADER_SIZE + 4 * n) {
      throw new FrameDecodeError("f32 payload size mismatch");
    }
    // byte-exact: reinterpret the little-endian payload
    data = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      data[i] = view.getFloat32(HEADER_SIZE + 4 * i, true);
    }
  }
  return { step, channels, height, width, data };
}

export function channelView(frame: Frame, c: number): Float32Array {
  const plane = frame.height * frame.width;
  return frame.data.subarray(c * plane, (c + 1) * plane);
}

// ---------------------------------------------------------------------------
// Control messages and edit commands

export type EditKind =
  | "draw_obstacle" | "erase_obstacle" | "erase_mass" | "spawn_init"
  | "place_attractor" | "move_attractor" | "remove_attractor"
  | "pause" | "resume" | "set_speed" | "load_params";

export interface DiskEdit {
  kind: "draw_obstacle" | "erase_obstacle" | "place_attractor" | "move_attractor";
  x: number;
  y: number;
  radius: number;
}

export interface RectEdit {
  kind: "erase_mass";
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface SpawnEdit {
  kind: "spawn_init";
  x: number;
  y: number;
  values: number[][];
}

export type EditCommand =
  | DiskEdit
  | RectEdit
  | SpawnEdit
  | { kind: "remove_attractor" }
  | { kind: "pause" }
  | { kind: "resume" }
  | { kind: "set_speed"; steps_per_second: number }
  | { kind: "load_params"; params: unknown };

export interface ControlMessage {
  type: "create" | "edit" | "subscribe" | "destroy" | "catalog" | "params";
  session?: string;
  payload?: unknown;
}

export interface ServerReply {
  type: string;
  session?: string;
  [key: string]: unknown;
}

/**
 * Session client: one websocket, JSON control plus binary frames.
 *
 * Delivered frame step indices must be strictly increasing (the server may
 * skip frames for slow clients but never reorders); a regression throws in
 * the decode path and the frame is dropped.  Frame decoding runs through an
 * injectable scheduler so the UI thread's input handling never waits on it.
 */

import { ControlMessage, EditCommand, Frame, decodeFrame } from "./protocol.js";

export type FrameHandler = (frame: Frame) => void;
export type ReplyHandler = (reply: Record<string, unknown>) => void;
export type Scheduler = (work: () => void) => void;

const asyncScheduler: Scheduler = (work) =>
  (typeof queueMicrotask === "function" ? queueMicrotask(work)
                                        : setTimeout(work, 0));

export class FrameSequencer {
  private lastStep = -1;

  /** Returns the frame when its step advances, null for stale frames. */
  accept(frame: Frame): Frame | null {
    if (frame.step <= this.lastStep) return null;
    this.lastStep = frame.step;
    return frame;
  }

  reset(): void {
    this.lastStep = -1;
  }
}

export interface ClientOptions {
  onFrame?: FrameHandler;
  onReply?: ReplyHandler;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
  scheduler?: Scheduler;
  retryMs?: number;
  socketFactory?: (url: string) => WebSocket;
}

export class SessionClient {
  private ws: WebSocket | null = null;
  private readonly sequencer = new FrameSequencer();
  private closed = false;

  constructor(private url: string, private options: ClientOptions = {}) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.options.onStatus?.("connecting");
    const make = this.options.socketFactory ??
      ((url: string) => new WebSocket(url));
    const ws = make(this.url);
    ws.binaryType = "arraybuffer";
    ws.onopen = () => this.options.onStatus?.("open");
    ws.onmessage = (event: MessageEvent) => this.handleMessage(event.data);
    ws.onclose = () => {
      this.options.onStatus?.("closed");
      this.sequencer.reset();
      if (!this.closed) {
        setTimeout(() => this.open(), this.options.retryMs ?? 1000);
      }
    };
    this.ws = ws;
  }

  handleMessage(data: unknown): void {
    if (typeof data === "string") {
      this.options.onReply?.(JSON.parse(data));
      return;
    }
    const schedule = this.options.scheduler ?? asyncScheduler;
    schedule(() => {
      const frame = this.sequencer.accept(decodeFrame(data as ArrayBuffer));
      if (frame) this.options.onFrame?.(frame);
    });
  }

  send(message: ControlMessage): boolean {
    if (!this.ws || this.ws.readyState !== 1 /* OPEN */) return false;
    this.ws.send(JSON.stringify(message));
    return true;
  }

  /** Edits while disconnected are discarded; callers may toast on false. */
  sendEdit(session: string, command: EditCommand): boolean {
    return this.send({ type: "edit", session, payload: command });
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

/** Playground assembly: canvas, toolbar, parameter browser, session wiring. */

import { SessionClient } from "./client.js";
import { Frame } from "./protocol.js";
import { paintFrame } from "./render.js";
import { initialViewState, setBrushRadius, setTool, Tool } from "./state.js";
import { GestureTracker, Point } from "./tools.js";

const state = initialViewState();
let tracker: GestureTracker | null = null;
let spawnValues: number[][] | null = null;
let gridShape: [number, number] = [256, 256];

const canvas = document.getElementById("grid") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const stepEl = document.getElementById("step")!;
const catalogEl = document.getElementById("catalog") as HTMLSelectElement;
const toastEl = document.getElementById("toast")!;

let imageData: ImageData | null = null;
let fpsCount = 0;
let fpsStamp = performance.now();

function toast(message: string): void {
  toastEl.textContent = message;
  toastEl.classList.add("visible");
  setTimeout(() => toastEl.classList.remove("visible"), 1500);
}

function drawFrame(frame: Frame): void {
  if (!imageData || imageData.width !== frame.width ||
      imageData.height !== frame.height) {
    canvas.width = frame.width;
    canvas.height = frame.height;
    imageData = ctx.createImageData(frame.width, frame.height);
    gridShape = [frame.height, frame.width];
  }
  // grid x = row = canvas y; grid y = column = canvas x
  paintFrame(frame, imageData.data);
  ctx.putImageData(imageData, 0, 0);
  stepEl.textContent = `step ${frame.step}`;
  fpsCount += 1;
  const now = performance.now();
  if (now - fpsStamp > 2000) {
    statusEl.textContent = `live (${(fpsCount / ((now - fpsStamp) / 1000)).toFixed(0)} fps)`;
    fpsCount = 0;
    fpsStamp = now;
  }
}

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new SessionClient(wsUrl, {
  onFrame: drawFrame,
  onReply: handleReply,
  onStatus: (s) => {
    if (s !== "open") statusEl.textContent = s;
    if (s === "open") bootstrap();
  },
});

function handleReply(reply: Record<string, unknown>): void {
  switch (reply.type) {
    case "created":
      state.session = reply.session as string;
      client.send({ type: "subscribe", session: state.session });
      break;
    case "catalog": {
      state.catalog = reply.entries as string[];
      catalogEl.innerHTML = "<option value=''>random rules</option>";
      for (const id of state.catalog) {
        const option = document.createElement("option");
        option.value = id;
        option.textContent = id;
        catalogEl.appendChild(option);
      }
      break;
    }
    case "params": {
      const doc = reply.doc as { init?: { data: number[]; shape: number[] } };
      if (doc.init && Array.isArray(doc.init.data)) {
        const [h, w] = doc.init.shape;
        spawnValues = [];
        for (let i = 0; i < h; i++) {
          spawnValues.push(doc.init.data.slice(i * w, (i + 1) * w) as number[]);
        }
      }
      break;
    }
    case "error":
      toast(String(reply.message));
      break;
  }
}

function bootstrap(): void {
  client.send({ type: "catalog" });
  createSession();
}

function createSession(): void {
  const payload: Record<string, unknown> = {
    grid: [256, 256],
    steps_per_second: state.stepsPerSecond,
  };
  if (state.selectedParams) payload.params = state.selectedParams;
  client.send({ type: "create", payload });
}

function canvasPoint(event: MouseEvent): Point {
  const rect = canvas.getBoundingClientRect();
  const cy = ((event.clientX - rect.left) / rect.width) * canvas.width;
  const cx = ((event.clientY - rect.top) / rect.height) * canvas.height;
  return { x: Math.max(0, Math.min(gridShape[0] - 1, cx)),
           y: Math.max(0, Math.min(gridShape[1] - 1, cy)) };
}

function sendAll(commands: ReturnType<GestureTracker["begin"]>): void {
  if (!state.session) return;
  for (const command of commands) {
    if (!client.sendEdit(state.session, command)) {
      toast("disconnected: edit discarded");
    }
  }
}

canvas.addEventListener("mousedown", (event) => {
  tracker = new GestureTracker(state.tool, state.brushRadius, spawnValues);
  sendAll(tracker.begin(canvasPoint(event)));
});
canvas.addEventListener("mousemove", (event) => {
  if (tracker) sendAll(tracker.move(canvasPoint(event)));
});
window.addEventListener("mouseup", () => {
  if (tracker) sendAll(tracker.end());
  tracker = null;
});

for (const id of ["obstacle", "erase_obstacle", "erase", "spawn", "attractor"]) {
  const button = document.getElementById(`tool-${id}`)!;
  button.addEventListener("click", () => {
    Object.assign(state, setTool(state, id as Tool));
    document.querySelectorAll(".tool").forEach((el) =>
      el.classList.toggle("active", el.id === `tool-${id}`));
    if (id === "spawn" && state.selectedParams) {
      client.send({ type: "params", payload: { id: state.selectedParams } });
    }
  });
}

(document.getElementById("brush") as HTMLInputElement).addEventListener(
  "input", (event) => {
    Object.assign(state, setBrushRadius(
      state, Number((event.target as HTMLInputElement).value)));
  });

(document.getElementById("rate") as HTMLInputElement).addEventListener(
  "change", (event) => {
    state.stepsPerSecond = Number((event.target as HTMLInputElement).value);
    if (state.session) {
      client.sendEdit(state.session, {
        kind: "set_speed", steps_per_second: state.stepsPerSecond });
    }
  });

document.getElementById("pause")!.addEventListener("click", () => {
  if (!state.session) return;
  state.paused = !state.paused;
  client.sendEdit(state.session, { kind: state.paused ? "pause" : "resume" });
  document.getElementById("pause")!.textContent =
    state.paused ? "resume" : "pause";
});

document.getElementById("clear-attractor")!.addEventListener("click", () => {
  if (state.session) {
    client.sendEdit(state.session, { kind: "remove_attractor" });
  }
});

catalogEl.addEventListener("change", () => {
  state.selectedParams = catalogEl.value || null;
  if (state.session) client.send({ type: "destroy", session: state.session });
  state.session = null;
  if (state.selectedParams) {
    client.send({ type: "params", payload: { id: state.selectedParams } });
  }
  createSession();
});

client.connect();

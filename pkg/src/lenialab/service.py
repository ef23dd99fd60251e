"""Live session service: interactive simulations over a websocket.

Wire protocol (one socket per client, any number of sessions):

  control (JSON text):   {"type": "create" | "edit" | "subscribe" |
                          "destroy" | "catalog", "session": id?, "payload": {...}}
  frames (binary):       16-byte header '<4sBBHHHI' =
                          magic b"LENF", flags, reserved, C, H, W, step
                         followed by C*H*W little-endian float32 cell values
                         (or uint8 = round(v * 255) when flags bit 0 is set).

Edits are queued and applied atomically between steps; a paused session
steps nothing and emits nothing.  Slow subscribers fall back to
latest-frame semantics (a one-slot queue per subscriber), so delivered
step indices are strictly increasing but may skip.
"""

from __future__ import annotations

import asyncio
import json
import os
import struct
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .engine import step as engine_step
from .grids import GridState
from .kernels import compile_rules
from .params import (CHANNEL_ATTRACTOR, InitPattern, RuleSet, obstacle_rule,
                     ruleset_from_json, sample_ruleset)

FRAME_MAGIC = b"LENF"
FRAME_HEADER = struct.Struct("<4sBBHHHI")
FLAG_U8 = 0x01

EDIT_KINDS = {
    "draw_obstacle", "erase_obstacle", "erase_mass", "spawn_init",
    "place_attractor", "move_attractor", "remove_attractor",
    "pause", "resume", "set_speed", "load_params",
}


def encode_frame(channels: np.ndarray, step: int, as_u8: bool = False) -> bytes:
    C, H, W = channels.shape
    flags = FLAG_U8 if as_u8 else 0
    header = FRAME_HEADER.pack(FRAME_MAGIC, flags, 0, C, H, W, step)
    if as_u8:
        body = np.round(np.clip(channels, 0, 1) * 255).astype(np.uint8).tobytes()
    else:
        body = channels.astype("<f4").tobytes()
    return header + body


def decode_frame(blob: bytes) -> tuple[int, np.ndarray]:
    magic, flags, _, C, H, W, step = FRAME_HEADER.unpack_from(blob, 0)
    if magic != FRAME_MAGIC:
        raise ValueError("bad frame magic")
    body = blob[FRAME_HEADER.size:]
    if flags & FLAG_U8:
        data = np.frombuffer(body, dtype=np.uint8).astype(np.float32) / 255.0
    else:
        data = np.frombuffer(body, dtype="<f4").astype(np.float32)
    return step, data.reshape(C, H, W)


def _clip_disk(shape, x, y, radius):
    xs = np.arange(shape[0], dtype=np.float64)[:, None]
    ys = np.arange(shape[1], dtype=np.float64)[None, :]
    return (xs - x) ** 2 + (ys - y) ** 2 < radius ** 2


def _clip_rect(shape, x0, y0, x1, y1):
    x0, x1 = sorted((int(x0), int(x1)))
    y0, y1 = sorted((int(y0), int(y1)))
    x0 = max(0, x0); y0 = max(0, y0)
    x1 = min(shape[0], x1); y1 = min(shape[1], y1)
    return (slice(x0, x1), slice(y0, y1))


def _region_mask(shape, payload):
    if "radius" in payload:
        return _clip_disk(shape, float(payload["x"]), float(payload["y"]),
                          float(payload["radius"]))
    mask = np.zeros(shape, dtype=bool)
    mask[_clip_rect(shape, payload["x0"], payload["y0"],
                    payload["x1"], payload["y1"])] = True
    return mask


@dataclass
class Session:
    """One interactive simulation: grid, rules, edit queue, subscribers."""

    id: str
    state: GridState
    rules: RuleSet
    steps_per_second: float = 20.0
    paused: bool = False
    edits: list = field(default_factory=list)
    subscribers: list = field(default_factory=list)
    attractor: tuple[float, float, float] | None = None
    _compiled: object = None
    _task: asyncio.Task | None = None

    def compiled(self):
        if self._compiled is None:
            self._compiled = compile_rules(self.rules, self.state.shape,
                                           self.state.channels.dtype)
        return self._compiled

    def invalidate(self):
        self._compiled = None

    # -- edit application (between steps) -------------------------------

    def apply_edit(self, cmd: dict) -> None:
        kind = cmd.get("kind")
        shape = self.state.shape
        ch = self.state.channels
        if kind == "draw_obstacle":
            ch[1][_region_mask(shape, cmd)] = 1.0
        elif kind == "erase_obstacle":
            ch[1][_region_mask(shape, cmd)] = 0.0
        elif kind == "erase_mass":
            ch[0][_region_mask(shape, cmd)] = 0.0
        elif kind == "spawn_init":
            values = np.asarray(cmd["values"], dtype=ch.dtype)
            x0, y0 = int(cmd["x"]), int(cmd["y"])
            x1 = min(shape[0], x0 + values.shape[0])
            y1 = min(shape[1], y0 + values.shape[1])
            if x1 > x0 and y1 > y0:
                ch[0][x0:x1, y0:y1] = values[:x1 - x0, :y1 - y0]
        elif kind in ("place_attractor", "move_attractor"):
            self._ensure_attractor_channel()
            radius = float(cmd.get("radius",
                                   self.attractor[2] if self.attractor else 8.0))
            self.attractor = (float(cmd["x"]), float(cmd["y"]), radius)
            self.state.channels[2][:] = 0.0
            self.state.channels[2][_clip_disk(shape, *self.attractor)] = 1.0
        elif kind == "remove_attractor":
            self.attractor = None
            if self.state.channels.shape[0] > 2:
                self.state.channels[2][:] = 0.0
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "set_speed":
            self.steps_per_second = max(0.1, float(cmd["steps_per_second"]))
        elif kind == "load_params":
            rules, _ = ruleset_from_json(cmd["params"])
            if not any(r.kind == "obstacle" for r in rules.rules):
                rules.rules.append(obstacle_rule())
            self.rules = rules
            self.invalidate()
        else:
            raise ValueError(f"unknown edit kind {kind!r}")

    def _ensure_attractor_channel(self):
        if self.state.channels.shape[0] <= CHANNEL_ATTRACTOR:
            C, H, W = self.state.channels.shape
            grown = np.zeros((CHANNEL_ATTRACTOR + 1, H, W),
                             dtype=self.state.channels.dtype)
            grown[:C] = self.state.channels
            self.state.channels = grown
            self.invalidate()

    def drain_edits(self) -> None:
        pending, self.edits = self.edits, []
        for cmd in pending:
            self.apply_edit(cmd)

    def advance(self) -> None:
        self.state = engine_step(self.state, self.rules,
                                 compiled=self.compiled())

    def frame(self, as_u8: bool = False) -> bytes:
        return encode_frame(self.state.channels, self.state.step, as_u8)

    def broadcast(self) -> None:
        blob = self.frame()
        for queue in self.subscribers:
            if queue.full():
                try:
                    queue.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            queue.put_nowait(blob)


def make_session(payload: dict, catalog: dict[str, Path]) -> Session:
    shape = tuple(payload.get("grid", (256, 256)))
    dtype = np.float32
    rules = None
    init = None
    params = payload.get("params")
    if isinstance(params, str):
        from .params import load_params
        if params not in catalog:
            raise ValueError(f"unknown params id {params!r}")
        rules, init = load_params(catalog[params])
    elif isinstance(params, dict):
        rules, init = ruleset_from_json(params)
    if rules is None:
        rules = sample_ruleset(np.random.default_rng(0), n_rules=10)
    if not any(r.kind == "obstacle" for r in rules.rules):
        rules.rules.append(obstacle_rule())

    n_channels = max(rules.channel_count(), 2)
    channels = np.zeros((n_channels, *shape), dtype=dtype)
    if init is not None and payload.get("place_init", True):
        x0, y0 = init.placement
        h, w = init.values.shape
        x0 = min(max(0, x0), shape[0] - h)
        y0 = min(max(0, y0), shape[1] - w)
        channels[0, x0:x0 + h, y0:y0 + w] = init.values
    session = Session(
        id=uuid.uuid4().hex[:12],
        state=GridState(channels),
        rules=rules,
        steps_per_second=float(payload.get("steps_per_second", 20.0)),
        paused=bool(payload.get("paused", False)),
    )
    return session


def scan_catalog(params_dir: str | Path | None) -> dict[str, Path]:
    """Parameter files available to sessions: bare .params.json files plus
    discovery-run pattern directories."""
    catalog: dict[str, Path] = {}
    if params_dir is None:
        return catalog
    root = Path(params_dir)
    if not root.exists():
        return catalog
    for path in sorted(root.rglob("*.params.json")):
        rel = path.relative_to(root)
        catalog[str(rel)[: -len(".params.json")]] = path
    for path in sorted(root.rglob("*.json")):
        if path.name in ("run.json",) or path.name.endswith(".params.json"):
            continue
        try:
            doc = json.loads(path.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError):
            continue
        if isinstance(doc, dict) and "rules" in doc and "R" in doc:
            catalog.setdefault(str(path.relative_to(root))[:-len(".json")], path)
    return catalog


def create_app(params_dir: str | Path | None = None,
               assets_dir: str | Path | None = None):
    """FastAPI app hosting the session websocket and the playground assets."""
    app = FastAPI(title="lenialab session service")
    sessions: dict[str, Session] = {}
    catalog = scan_catalog(params_dir or os.environ.get("DATA_DIR"))

    async def _run_session(session: Session):
        try:
            while session.id in sessions:
                if session.paused:
                    await asyncio.sleep(0.02)
                    continue
                session.drain_edits()
                session.advance()
                session.broadcast()
                await asyncio.sleep(1.0 / session.steps_per_second)
        except asyncio.CancelledError:
            pass

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "sessions": len(sessions)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        my_queues: list[tuple[Session, asyncio.Queue]] = []
        forwarders: list[asyncio.Task] = []

        async def forward(queue: asyncio.Queue):
            while True:
                blob = await queue.get()
                await ws.send_bytes(blob)

        try:
            while True:
                msg = json.loads(await ws.receive_text())
                mtype = msg.get("type")
                payload = msg.get("payload") or {}
                try:
                    if mtype == "create":
                        session = make_session(payload, catalog)
                        sessions[session.id] = session
                        session._task = asyncio.create_task(_run_session(session))
                        await ws.send_json({
                            "type": "created", "session": session.id,
                            "step": session.state.step,
                            "shape": list(session.state.channels.shape),
                        })
                    elif mtype == "edit":
                        session = sessions[msg["session"]]
                        cmd = dict(payload)
                        if cmd.get("kind") not in EDIT_KINDS:
                            raise ValueError(f"unknown edit kind {cmd.get('kind')!r}")
                        if cmd["kind"] in ("pause", "resume", "set_speed"):
                            session.apply_edit(cmd)  # control edits act now
                        else:
                            session.edits.append(cmd)
                        await ws.send_json({"type": "ack", "session": session.id,
                                            "kind": cmd["kind"]})
                    elif mtype == "subscribe":
                        session = sessions[msg["session"]]
                        queue: asyncio.Queue = asyncio.Queue(maxsize=1)
                        session.subscribers.append(queue)
                        my_queues.append((session, queue))
                        forwarders.append(asyncio.create_task(forward(queue)))
                        await ws.send_json({"type": "subscribed",
                                            "session": session.id})
                    elif mtype == "destroy":
                        session = sessions.pop(msg["session"], None)
                        if session and session._task:
                            session._task.cancel()
                        await ws.send_json({"type": "destroyed"})
                    elif mtype == "catalog":
                        await ws.send_json({
                            "type": "catalog",
                            "entries": sorted(catalog.keys()),
                        })
                    elif mtype == "params":
                        from .params import load_params, ruleset_to_json
                        pid = payload.get("id")
                        if pid not in catalog:
                            raise ValueError(f"unknown params id {pid!r}")
                        rules, init = load_params(catalog[pid])
                        await ws.send_json({
                            "type": "params", "id": pid,
                            "doc": ruleset_to_json(rules, init),
                        })
                    else:
                        await ws.send_json({"type": "error",
                                            "message": f"unknown type {mtype!r}"})
                except KeyError as err:
                    await ws.send_json({"type": "error",
                                        "message": f"unknown session {err}"})
                except (ValueError, TypeError) as err:
                    await ws.send_json({"type": "error", "message": str(err)})
        except WebSocketDisconnect:
            pass
        finally:
            for task in forwarders:
                task.cancel()
            for session, queue in my_queues:
                if queue in session.subscribers:
                    session.subscribers.remove(queue)

    if assets_dir and Path(assets_dir).exists():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(assets_dir), html=True),
                  name="playground")
    return app


def serve(bind: str = "127.0.0.1:8700",
          params_dir: str | Path | None = None,
          assets_dir: str | Path | None = None) -> None:
    """Run the service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(params_dir, assets_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8700),
                log_level="warning")

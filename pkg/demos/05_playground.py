"""Drive a live session programmatically (the playground does this from the
browser).

Start the service first:

    lenialab serve --bind 127.0.0.1:8700 --params-dir runs/

then run this script to create a session, draw an obstacle wall, erase some
mass, and print the step indices of the streamed frames.  Requires the
`websockets` package (installed alongside uvicorn).
"""

import asyncio
import json

import numpy as np

from lenialab.service import decode_frame


async def main():
    import websockets

    async with websockets.connect("ws://127.0.0.1:8700/ws") as ws:
        await ws.send(json.dumps({"type": "create", "payload": {
            "grid": [128, 128], "steps_per_second": 60}}))
        created = json.loads(await ws.recv())
        sid = created["session"]
        print("session", sid)

        # a vertical wall of obstacle disks
        for x in range(20, 110, 8):
            await ws.send(json.dumps({"type": "edit", "session": sid,
                                      "payload": {"kind": "draw_obstacle",
                                                  "x": x, "y": 90,
                                                  "radius": 5}}))
            await ws.recv()
        await ws.send(json.dumps({"type": "edit", "session": sid,
                                  "payload": {"kind": "erase_mass",
                                              "x0": 10, "y0": 10,
                                              "x1": 30, "y1": 30}}))
        await ws.recv()

        await ws.send(json.dumps({"type": "subscribe", "session": sid}))
        await ws.recv()
        for _ in range(10):
            blob = await ws.recv()
            if isinstance(blob, bytes):
                step, channels = decode_frame(blob)
                print(f"frame step={step} obstacle cells="
                      f"{int(channels[1].sum())} mass={channels[0].sum():.1f}")
        await ws.send(json.dumps({"type": "destroy", "session": sid}))


if __name__ == "__main__":
    asyncio.run(main())

"""Websocket front door for a live session.

One session per server process. The first websocket connection is the
operator; every later one is a read-only spectator. Messages are JSON:

  server -> client   {"type": "welcome", "version": 1, "role": ..., "state": ...}
  client -> server   {"type": "command", "id": ..., "command": {...}}
  server -> operator {"type": "state", "id": ..., "state": {...}}
                     {"type": "error", "id": ..., "reason": ..., "detail": ...}
  server -> spectators {"type": "state", "state": {...}} after each accepted
                     command.

The state payload is Session.snapshot(): it carries the log index and the
state hash, so clients can detect staleness and verify replays without any
physics of their own. Command dicts use the same encoding as script files.
"""

import asyncio
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .commands import command_from_dict
from .session import Session, Scenario

PROTOCOL_VERSION = 1
SPECTATOR_REASON = "spectator connection is read-only"


class _Hub:
    def __init__(self, session: Session):
        self.session = session
        self.operator: Optional[WebSocket] = None
        self.spectators: List[WebSocket] = []
        self.lock = asyncio.Lock()

    def attach(self, ws: WebSocket) -> str:
        if self.operator is None:
            self.operator = ws
            return "operator"
        self.spectators.append(ws)
        return "spectator"

    def detach(self, ws: WebSocket):
        if ws is self.operator:
            self.operator = None
        elif ws in self.spectators:
            self.spectators.remove(ws)

    async def broadcast_state(self, state):
        for sp in list(self.spectators):
            try:
                await sp.send_json({"type": "state", "state": state})
            except Exception:
                self.detach(sp)


def create_app(scenario: Optional[Scenario] = None,
               static_dir=None) -> FastAPI:
    """App serving /ws for the session and, when static_dir exists, the
    operator console bundle at /. A scenario's script is applied before the
    first connection so clients join the scenario's end state."""
    if scenario is not None:
        session = Session.from_scenario(scenario)
        session.run_script(scenario.script)
    else:
        session = Session()
    app = FastAPI()
    hub = _Hub(session)
    app.state.hub = hub

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        role = hub.attach(ws)
        await ws.send_json({"type": "welcome", "version": PROTOCOL_VERSION,
                            "role": role, "state": hub.session.snapshot()})
        try:
            while True:
                msg = await ws.receive_json()
                mid = msg.get("id")
                if msg.get("type") != "command":
                    await ws.send_json({"type": "error", "id": mid,
                                        "reason": "unknown message type"})
                    continue
                if ws is not hub.operator:
                    await ws.send_json({"type": "error", "id": mid,
                                        "reason": SPECTATOR_REASON})
                    continue
                try:
                    cmd = command_from_dict(msg.get("command") or {})
                except Exception as exc:
                    await ws.send_json({"type": "error", "id": mid,
                                        "reason": "invalid command: %s" % exc})
                    continue
                async with hub.lock:
                    record = hub.session.execute(cmd)
                if record["ok"]:
                    state = hub.session.snapshot()
                    await ws.send_json({"type": "state", "id": mid,
                                        "state": state})
                    await hub.broadcast_state(state)
                else:
                    err = {"type": "error", "id": mid,
                           "reason": record["reason"]}
                    if "detail" in record:
                        err["detail"] = record["detail"]
                    await ws.send_json(err)
        except WebSocketDisconnect:
            pass
        finally:
            hub.detach(ws)

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="console")
    return app

"""HTTP/WebSocket service in front of the operator agent.

Endpoints (JSON bodies, epoch-ms timestamps):
  GET  /api/processes
  GET  /api/process/{name}
  POST /api/setpoint            {process, symbol, value} -> {outcome, alarmText}
  GET  /api/trend/{symbol}?from=&to=
  GET  /api/trend/{symbol}.csv
  WS   /ws/stream               server-pushed {type: "data"|"alarm", payload}

If a built operator console is available its directory can be mounted at /.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Optional

import uvicorn
from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .gateway import OperatorAgent

log = logging.getLogger(__name__)


class SetpointBody(BaseModel):
    process: str
    symbol: str
    value: float


def build_app(agent: OperatorAgent, static_dir: Optional[str] = None) -> FastAPI:
    clients: set[asyncio.Queue] = set()
    state = {"loop": None}

    def push_event(event: dict) -> None:
        loop = state["loop"]
        if loop is None or not clients:
            return

        def fanout():
            for q in list(clients):
                q.put_nowait(event)

        loop.call_soon_threadsafe(fanout)

    agent.add_listener(push_event)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        state["loop"] = asyncio.get_running_loop()
        yield
        state["loop"] = None

    app = FastAPI(title="icn operator gateway", lifespan=lifespan)

    @app.get("/api/processes")
    def processes():
        with agent._state:
            views = list(agent.views.values())
        return {
            "processes": [
                {"name": v.name, "stale": v.stale, "variables": len(v.rows)} for v in views
            ]
        }

    @app.get("/api/process/{name}")
    def process(name: str):
        with agent._state:
            view = agent.views.get(name)
            if view is None:
                raise HTTPException(404, f"unknown process: {name}")
            return view.to_json()

    @app.post("/api/setpoint")
    def setpoint(body: SetpointBody):
        outcome = agent.submit_setpoint(body.process, body.symbol, body.value)
        return outcome.to_json()

    @app.get("/api/trend/{symbol}.csv", response_class=PlainTextResponse)
    def trend_csv(
        symbol: str,
        from_: Optional[int] = Query(default=None, alias="from"),
        to: Optional[int] = Query(default=None, alias="to"),
    ):
        lo, hi = _bounds(agent, symbol, from_, to)
        return agent.trend.to_csv(symbol, lo, hi)

    @app.get("/api/trend/{symbol}")
    def trend(
        symbol: str,
        from_: Optional[int] = Query(default=None, alias="from"),
        to: Optional[int] = Query(default=None, alias="to"),
    ):
        lo, hi = _bounds(agent, symbol, from_, to)
        samples = agent.trend_query(symbol, lo, hi)
        return {
            "symbol": symbol,
            "samples": [{"t": s.t, "pv": s.PV, "sp": s.SP} for s in samples],
        }

    @app.websocket("/ws/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue()
        clients.add(q)
        try:
            while True:
                event = await q.get()
                await ws.send_text(json.dumps(event))
        except WebSocketDisconnect:
            pass
        finally:
            clients.discard(q)

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def _bounds(agent, symbol, from_, to):
    lo, hi = agent.trend.full_range(symbol)
    return (lo if from_ is None else from_, hi if to is None else to)


class GatewayServer:
    """uvicorn on a background thread, bound port known after start()."""

    def __init__(
        self,
        agent: OperatorAgent,
        host: str = "127.0.0.1",
        port: int = 8765,
        static_dir: Optional[str] = None,
    ):
        self.app = build_app(agent, static_dir)
        config = uvicorn.Config(
            self.app, host=host, port=port, log_level="warning", access_log=False
        )
        self._server = uvicorn.Server(config)
        self._thread: Optional[threading.Thread] = None
        self.host = host
        self.port: Optional[int] = None

    def start(self, timeout: float = 10.0) -> int:
        self._thread = threading.Thread(target=self._server.run, name="gateway-http", daemon=True)
        self._thread.start()
        deadline = timeout
        import time as _time

        waited = 0.0
        while not self._server.started:
            if not self._thread.is_alive():
                raise RuntimeError("gateway server failed to start (port in use?)")
            _time.sleep(0.02)
            waited += 0.02
            if waited > deadline:
                raise RuntimeError("gateway server did not start in time")
        sock = self._server.servers[0].sockets[0]
        self.port = sock.getsockname()[1]
        return self.port

    def stop(self) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

"""TCP message transport: newline-delimited JSON envelopes, UTF-8.

One outbound connection per remote endpoint, reused and serialized so the
per-pair FIFO guarantee extends across the wire. AID addresses use the
`http://host:port/acc` URL shape; only host and port matter here.
"""

from __future__ import annotations

import json
import logging
import re
import socket
import socketserver
import threading
import time
from typing import Optional

from .ontology import ACLMessage, AID, Performative

log = logging.getLogger(__name__)

_URL_RE = re.compile(r"^(?:http|tcp)://([^/:]+):(\d+)(?:/.*)?$")

CONNECT_RETRIES = 3
RETRY_BACKOFF_S = 0.25


def parse_transport_url(url: str) -> Optional[tuple[str, int]]:
    m = _URL_RE.match(url)
    if not m:
        return None
    return m.group(1), int(m.group(2))


def _aid_to_json(aid: AID) -> dict:
    return {"name": aid.name, "addresses": list(aid.addresses)}


def _aid_from_json(obj: dict) -> AID:
    return AID(obj["name"], tuple(obj.get("addresses", ())))


def envelope_to_line(msg: ACLMessage) -> str:
    """Single-line JSON with exactly the envelope's field names."""
    return json.dumps(
        {
            "performative": msg.performative.value,
            "sender": _aid_to_json(msg.sender),
            "receivers": [_aid_to_json(r) for r in msg.receivers],
            "content": msg.content,
            "language": msg.language,
            "ontology": msg.ontology,
            "conversation_id": msg.conversation_id,
            "reply_with": msg.reply_with,
            "in_reply_to": msg.in_reply_to,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def envelope_from_line(line: str) -> ACLMessage:
    obj = json.loads(line)
    return ACLMessage(
        performative=Performative(obj["performative"]),
        sender=_aid_from_json(obj["sender"]),
        receivers=[_aid_from_json(r) for r in obj["receivers"]],
        content=obj.get("content", ""),
        language=obj.get("language", ""),
        ontology=obj.get("ontology", ""),
        conversation_id=obj.get("conversation_id", ""),
        reply_with=obj.get("reply_with", ""),
        in_reply_to=obj.get("in_reply_to"),
    )


class TcpListener:
    """Accepts envelope streams and hands messages to the platform."""

    def __init__(self, platform, host: str, port: int):
        self._platform = platform
        self._host = host
        self._port = port
        self._server: Optional[socketserver.ThreadingTCPServer] = None
        self._thread: Optional[threading.Thread] = None

    def start(self) -> int:
        platform = self._platform

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for raw in self.rfile:
                    line = raw.decode("utf-8").strip()
                    if not line:
                        continue
                    try:
                        msg = envelope_from_line(line)
                    except (ValueError, KeyError) as e:
                        log.warning("bad envelope dropped: %s", e)
                        continue
                    platform.deliver_from_wire(msg)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((self._host, self._port), Handler)
        bound_port = self._server.server_address[1]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name=f"acc-{bound_port}", daemon=True
        )
        self._thread.start()
        return bound_port

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None


class TcpConnector:
    """Outbound connection pool; one serialized stream per endpoint."""

    max_retries = CONNECT_RETRIES

    def __init__(self):
        self._conns: dict[tuple[str, int], socket.socket] = {}
        self._locks: dict[tuple[str, int], threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, endpoint) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(endpoint, threading.Lock())

    def send_line(self, host: str, port: int, line: str) -> int:
        """Write one envelope line; returns how many retries were needed."""
        endpoint = (host, port)
        payload = (line + "\n").encode("utf-8")
        last_error: Optional[OSError] = None
        with self._lock_for(endpoint):
            for attempt in range(self.max_retries):
                try:
                    sock = self._conns.get(endpoint)
                    if sock is None:
                        sock = socket.create_connection(endpoint, timeout=5.0)
                        self._conns[endpoint] = sock
                    sock.sendall(payload)
                    return attempt
                except OSError as e:
                    last_error = e
                    self._drop(endpoint)
                    if attempt + 1 < self.max_retries:
                        time.sleep(RETRY_BACKOFF_S)
        raise last_error if last_error else OSError("send failed")

    def _drop(self, endpoint) -> None:
        sock = self._conns.pop(endpoint, None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    def close(self) -> None:
        with self._guard:
            for endpoint in list(self._conns):
                self._drop(endpoint)

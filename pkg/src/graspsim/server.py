"""Socket server hosting live sessions over the framed JSON protocol.

Each connection hosts at most one session. Inbound message types:

* ``{"type": "create_session", "config": {...}}`` -- start a session; the
  config object uses the same schema as CLI config files.
* ``{"type": "utterance", "text": "..."}``
* ``{"type": "key", "key": "0".."9"}``
* ``{"type": "end"}`` -- ends the session and closes the channel.

Outbound messages are SessionEvents: ``{"seq", "kind", "tick", "payload"}``.
Protocol violations are answered with an Error event (seq -1 before a
session exists) and the channel stays open. Sessions on different
connections are fully independent and may run concurrently.
"""

from __future__ import annotations

import socketserver
import threading

from .errors import BindError, ProtocolError, ValidationError
from .protocol import read_message, write_message
from .session import SessionConfig, SessionEngine


def _orphan_error(detail: str) -> dict:
    return {"seq": -1, "kind": "Error", "tick": -1,
            "payload": {"error": "Protocol", "detail": detail}}


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        engine: SessionEngine | None = None
        while True:
            try:
                message = read_message(self.rfile)
            except ProtocolError as exc:
                try:
                    write_message(self.wfile, _orphan_error(str(exc)))
                except OSError:
                    return
                continue
            except OSError:
                return
            if message is None:
                return

            try:
                events = self._dispatch(engine, message)
            except _CreateSession as created:
                engine = created.engine
                events = created.events
            except ProtocolError as exc:
                if engine is not None and not engine.ended:
                    events = engine.emit_protocol_error(str(exc))
                else:
                    events = None
                    try:
                        write_message(self.wfile, _orphan_error(str(exc)))
                    except OSError:
                        return
                if events is None:
                    continue

            try:
                for event in events:
                    write_message(self.wfile, event.to_wire())
            except OSError:
                return
            if message.get("type") == "end":
                return

    def _dispatch(self, engine: SessionEngine | None, message: dict):
        msg_type = message.get("type")
        if msg_type == "create_session":
            if engine is not None:
                raise ProtocolError("session already created on this channel")
            config_doc = message.get("config")
            if not isinstance(config_doc, dict):
                raise ProtocolError("create_session requires a 'config' object")
            try:
                config = SessionConfig.from_dict(config_doc)
            except ValidationError as exc:
                raise ProtocolError(f"invalid config: {exc}") from exc
            new_engine = SessionEngine(config)
            raise _CreateSession(new_engine, new_engine.start())
        if engine is None:
            raise ProtocolError("create_session must come first")
        if msg_type == "utterance":
            text = message.get("text")
            if not isinstance(text, str):
                raise ProtocolError("utterance requires a 'text' string")
            return engine.handle_utterance(text)
        if msg_type == "key":
            key = message.get("key")
            if not isinstance(key, str) or len(key) != 1 or not key.isdigit():
                raise ProtocolError("key requires a single digit string")
            return engine.handle_key(key)
        if msg_type == "end":
            return engine.handle_end(reason="client_end")
        raise ProtocolError(f"unknown message type {msg_type!r}")


class _CreateSession(Exception):
    def __init__(self, engine: SessionEngine, events):
        self.engine = engine
        self.events = events


class SessionServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    if not host or not port:
        raise BindError(f"bind address must be host:port, got {bind!r}")
    try:
        return host, int(port)
    except ValueError as exc:
        raise BindError(f"invalid port in {bind!r}") from exc


def create_server(bind: str) -> SessionServer:
    host, port = parse_bind(bind)
    try:
        return SessionServer((host, port), _SessionHandler)
    except OSError as exc:
        raise BindError(f"cannot bind {bind}: {exc}") from exc


def serve(bind: str) -> None:
    """Run the server until interrupted; prints the bound address on startup."""
    server = create_server(bind)
    host, port = server.server_address[:2]
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()


def start_server_thread(bind: str = "127.0.0.1:0") -> tuple[SessionServer, int]:
    """Start a server on a background thread; returns it with the bound port."""
    server = create_server(bind)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, server.server_address[1]

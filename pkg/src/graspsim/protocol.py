"""Length-delimited JSON message framing.

Every message is a 4-byte big-endian unsigned length followed by that many
bytes of UTF-8 JSON. The framing keeps the stream in sync even when a body
fails to parse, so a malformed message can be answered without closing the
channel.
"""

from __future__ import annotations

import json
import struct

from .errors import ProtocolError

_HEADER = struct.Struct(">I")
MAX_MESSAGE_BYTES = 16 * 1024 * 1024


def encode_message(obj) -> bytes:
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"message of {len(body)} bytes exceeds limit")
    return _HEADER.pack(len(body)) + body


def write_message(fp, obj) -> None:
    fp.write(encode_message(obj))
    fp.flush()


def _read_exact(fp, n: int) -> bytes | None:
    chunks = b""
    while len(chunks) < n:
        part = fp.read(n - len(chunks))
        if not part:
            return None if not chunks else chunks  # truncated stream
        chunks += part
    return chunks


def read_message(fp) -> dict | None:
    """Read one framed message; None at a clean end of stream.

    Raises ProtocolError for truncated frames, oversized lengths, or bodies
    that are not JSON objects.
    """
    header = _read_exact(fp, _HEADER.size)
    if header is None:
        return None
    if len(header) < _HEADER.size:
        raise ProtocolError("truncated frame header")
    (length,) = _HEADER.unpack(header)
    if length > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"frame length {length} exceeds limit")
    body = _read_exact(fp, length)
    if body is None or len(body) < length:
        raise ProtocolError("truncated frame body")
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame body is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("frame body must be a JSON object")
    return obj


class FrameDecoder:
    """Incremental decoder for byte chunks arriving off a socket."""

    def __init__(self) -> None:
        self._buffer = b""

    def feed(self, data: bytes) -> list[dict]:
        self._buffer += data
        messages = []
        while True:
            if len(self._buffer) < _HEADER.size:
                return messages
            (length,) = _HEADER.unpack(self._buffer[:_HEADER.size])
            if length > MAX_MESSAGE_BYTES:
                raise ProtocolError(f"frame length {length} exceeds limit")
            end = _HEADER.size + length
            if len(self._buffer) < end:
                return messages
            body = self._buffer[_HEADER.size:end]
            self._buffer = self._buffer[end:]
            try:
                obj = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ProtocolError(f"frame body is not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ProtocolError("frame body must be a JSON object")
            messages.append(obj)

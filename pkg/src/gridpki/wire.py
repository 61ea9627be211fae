"""Minimal HTTP/1.1 client over raw sockets with exact byte accounting.

The protocol-cost comparisons in this package count HTTP message bytes
(start line plus headers plus body) in both directions, so requests are
assembled by hand and responses are framed by Content-Length.  Persistent
connections are supported for benchmarking.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlsplit

USER_AGENT = "gridpki/0.1"
_RECV_CHUNK = 65536


class TransportError(Exception):
    """Connection, timeout, or framing failure while talking HTTP."""


@dataclass
class HttpReply:
    status: int
    headers: dict[str, str]
    body: bytes
    bytes_sent: int
    bytes_received: int

    @property
    def total_bytes(self) -> int:
        return self.bytes_sent + self.bytes_received


def split_url(url: str) -> tuple[str, int, str]:
    parts = urlsplit(url)
    if parts.scheme != "http":
        raise ValueError(f"only plain http URLs are supported, got {url!r}")
    if parts.hostname is None:
        raise ValueError(f"URL has no host: {url!r}")
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    return parts.hostname, parts.port or 80, path


class HttpConnection:
    """One TCP connection; keeps alive across requests unless told to close."""

    def __init__(self, host: str, port: int, timeout_s: float = 10.0):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self._sock: Optional[socket.socket] = None
        self._buffer = b""

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection(
                    (self.host, self.port), timeout=self.timeout_s
                )
                self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            except OSError as exc:
                raise TransportError(f"connect {self.host}:{self.port}: {exc}") from exc
            self._buffer = b""
        return self._sock

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
                self._buffer = b""

    def __enter__(self):
        return self

    def __exit__(self, *_exc):
        self.close()

    def request(
        self,
        method: str,
        path: str,
        headers: Optional[list[tuple[str, str]]] = None,
        body: Optional[bytes] = None,
        close: bool = False,
    ) -> HttpReply:
        sock = self._connect()
        lines = [f"{method} {path} HTTP/1.1", f"Host: {self.host}:{self.port}"]
        lines.append(f"User-Agent: {USER_AGENT}")
        for name, value in headers or []:
            lines.append(f"{name}: {value}")
        if body is not None:
            lines.append(f"Content-Length: {len(body)}")
        if close:
            lines.append("Connection: close")
        head = ("\r\n".join(lines) + "\r\n\r\n").encode("ascii")
        payload = head + (body or b"")
        try:
            sock.sendall(payload)
            reply = self._read_reply(sock)
        except socket.timeout as exc:
            self.close()
            raise TransportError(f"timeout talking to {self.host}:{self.port}") from exc
        except OSError as exc:
            self.close()
            raise TransportError(f"socket error: {exc}") from exc
        reply.bytes_sent = len(payload)
        if close or reply.headers.get("connection", "").lower() == "close":
            self.close()
        return reply

    def _read_until_blank_line(self, sock: socket.socket) -> bytes:
        while b"\r\n\r\n" not in self._buffer:
            chunk = sock.recv(_RECV_CHUNK)
            if not chunk:
                raise TransportError("connection closed before response headers")
            self._buffer += chunk
        head, self._buffer = self._buffer.split(b"\r\n\r\n", 1)
        return head + b"\r\n\r\n"

    def _read_exact(self, sock: socket.socket, count: int) -> bytes:
        while len(self._buffer) < count:
            chunk = sock.recv(_RECV_CHUNK)
            if not chunk:
                raise TransportError("connection closed mid-body")
            self._buffer += chunk
        body, self._buffer = self._buffer[:count], self._buffer[count:]
        return body

    def _read_reply(self, sock: socket.socket) -> HttpReply:
        raw_head = self._read_until_blank_line(sock)
        lines = raw_head[:-4].decode("iso-8859-1").split("\r\n")
        status_parts = lines[0].split(" ", 2)
        if len(status_parts) < 2 or not status_parts[0].startswith("HTTP/1."):
            raise TransportError(f"bad status line {lines[0]!r}")
        try:
            status = int(status_parts[1])
        except ValueError as exc:
            raise TransportError(f"bad status code in {lines[0]!r}") from exc
        headers: dict[str, str] = {}
        for line in lines[1:]:
            name, sep, value = line.partition(":")
            if sep:
                headers[name.strip().lower()] = value.strip()
        if headers.get("transfer-encoding"):
            raise TransportError("chunked responses are not supported")
        length_text = headers.get("content-length")
        if length_text is not None:
            body = self._read_exact(sock, int(length_text))
        elif headers.get("connection", "").lower() == "close":
            body = self._buffer
            while True:
                chunk = sock.recv(_RECV_CHUNK)
                if not chunk:
                    break
                body += chunk
            self._buffer = b""
        else:
            raise TransportError("response has no Content-Length")
        return HttpReply(
            status=status,
            headers=headers,
            body=body,
            bytes_sent=0,
            bytes_received=len(raw_head) + len(body),
        )


def exchange(
    url: str,
    method: str = "GET",
    headers: Optional[list[tuple[str, str]]] = None,
    body: Optional[bytes] = None,
    timeout_s: float = 10.0,
) -> HttpReply:
    """One-shot request on a fresh connection (Connection: close)."""
    host, port, path = split_url(url)
    with HttpConnection(host, port, timeout_s) as conn:
        return conn.request(method, path, headers=headers, body=body, close=True)

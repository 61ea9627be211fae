"""HTTP front end for the OCSP responder.

POST / with an OCSP request body returns an OCSP response; malformed bodies
still get a 200 with a malformedRequest status (the error travels inside
the OCSP payload), while non-POST methods get 405.  The listener can be
paused and resumed on a fixed port, which is how outage experiments inject
connection refusals.
"""

from __future__ import annotations

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .ca import BindFailure
from .ocsp import OcspResponder

log = logging.getLogger("gridpki.responder")

REQUEST_CONTENT_TYPE = "application/ocsp-request"
RESPONSE_CONTENT_TYPE = "application/ocsp-response"


class OcspHttpServer:
    """Threaded HTTP server wrapping an OcspResponder."""

    def __init__(self, responder: OcspResponder, host: str = "127.0.0.1", port: int = 0):
        self.responder = responder
        self.host = host
        self.port = port
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    def _handler_class(self):
        responder = self.responder

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            disable_nagle_algorithm = True

            def do_POST(self):
                if self.path != "/":
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                payload = responder.handle(body)
                self.send_response(200)
                self.send_header("Content-Type", RESPONSE_CONTENT_TYPE)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self.send_error(405)

            do_PUT = do_DELETE = do_HEAD = do_GET

            def log_message(self, fmt, *args):
                log.debug("ocsp-http %s", fmt % args)

        return Handler

    def start(self) -> None:
        if self._httpd is not None:
            raise RuntimeError("already listening")
        try:
            self._httpd = ThreadingHTTPServer((self.host, self.port), self._handler_class())
        except OSError as exc:
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, kwargs={"poll_interval": 0.05},
            name="ocsp-http", daemon=True,
        )
        self._thread.start()
        log.info("OCSP endpoint on http://%s:%d/", self.host, self.port)

    def pause(self) -> None:
        """Close the listener; new connections are refused until resume()."""
        if self._httpd is None:
            return
        self._httpd.shutdown()
        self._httpd.server_close()
        self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        log.info("OCSP endpoint paused (port %d refusing connections)", self.port)

    def resume(self) -> None:
        """Reopen the listener on the same port."""
        if self._httpd is not None:
            return
        self.start()

    stop = pause

    @property
    def listening(self) -> bool:
        return self._httpd is not None

    def url(self) -> str:
        return f"http://{self.host}:{self.port}/"

"""Read-only static file serving for exported embeddings and the explorer."""

from __future__ import annotations

import functools
from http import HTTPStatus
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import ConfigError


class _ReadOnlyHandler(SimpleHTTPRequestHandler):
    def log_message(self, fmt, *args):  # keep test output clean
        pass

    def _reject(self):
        self.send_error(HTTPStatus.METHOD_NOT_ALLOWED, "read-only server")

    do_POST = do_PUT = do_DELETE = do_PATCH = _reject


def make_server(directory: str | Path, port: int = 0) -> ThreadingHTTPServer:
    """Bind a read-only static server on ``port`` (0 picks a free one)."""
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"{d}: not a directory")
    handler = functools.partial(_ReadOnlyHandler, directory=str(d))
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(directory: str | Path, port: int = 8000) -> None:
    """Serve ``directory`` until interrupted."""
    httpd = make_server(directory, port)
    host, actual_port = httpd.server_address[:2]
    print(f"serving {directory} at http://{host}:{actual_port}/ (read-only; Ctrl-C to stop)", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()

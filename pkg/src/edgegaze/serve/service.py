"""Minimal threaded TCP service base: one worker thread per connection."""

from __future__ import annotations

import socket
import threading


class ThreadedTCPService:
    """Accept loop on a daemon thread; subclasses implement handle_connection."""

    def __init__(self, bind=("127.0.0.1", 0), conn_timeout: float = 30.0):
        self._bind = bind
        self._conn_timeout = conn_timeout
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._running = False
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()

    @property
    def address(self) -> tuple[str, int]:
        if self._listener is None:
            raise RuntimeError("service not started")
        return self._listener.getsockname()[:2]

    def start(self) -> "ThreadedTCPService":
        if self._running:
            return self
        self._listener = socket.create_server(self._bind)
        self._listener.settimeout(0.2)
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(self._conn_timeout)
            with self._conns_lock:
                self._conns.add(conn)
            worker = threading.Thread(target=self._run_connection, args=(conn,), daemon=True)
            worker.start()

    def _run_connection(self, conn: socket.socket) -> None:
        try:
            self.handle_connection(conn)
        except (OSError, ConnectionError):
            pass
        finally:
            with self._conns_lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def handle_connection(self, conn: socket.socket) -> None:
        raise NotImplementedError

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

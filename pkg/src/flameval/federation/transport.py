"""Point-to-point message channels: in-process queues and TCP sockets."""

from __future__ import annotations

import queue
import select
import socket
import threading
import time

from ..errors import ProtocolError
from .messages import SCHEMA_VERSION, RoundMessage, decode_body, encode_message, frame_length


class ConnectionClosed(ProtocolError):
    """The peer closed the channel."""


class Connection:
    """One end of a bidirectional message channel."""

    def send(self, msg: RoundMessage) -> None:
        raise NotImplementedError

    def recv(self, timeout: float | None = None) -> RoundMessage:
        """Block for the next message; ``TimeoutError`` when ``timeout`` expires."""
        raise NotImplementedError

    def poll(self) -> bool:
        """True when a message is already waiting."""
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


_CLOSED = object()


class QueueConnection(Connection):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send(self, msg: RoundMessage) -> None:
        if self._closed:
            raise ConnectionClosed("send on closed channel")
        self._outbox.put(msg)

    def recv(self, timeout: float | None = None) -> RoundMessage:
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message within timeout") from None
        if item is _CLOSED:
            self._inbox.put(_CLOSED)
            raise ConnectionClosed("peer closed the channel")
        return item

    def poll(self) -> bool:
        with self._inbox.mutex:
            return any(item is not _CLOSED for item in self._inbox.queue)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSED)


def channel_pair() -> tuple[QueueConnection, QueueConnection]:
    """Two connected in-process endpoints ``(coordinator side, participant side)``."""
    a, b = queue.Queue(), queue.Queue()
    return QueueConnection(a, b), QueueConnection(b, a)


class SocketConnection(Connection):
    def __init__(self, sock: socket.socket, expected_version: int = SCHEMA_VERSION):
        self._sock = sock
        self._version = expected_version
        self._send_lock = threading.Lock()
        self._buf = bytearray()

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "SocketConnection":
        deadline = time.monotonic() + timeout
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=timeout)
                break
            except (ConnectionRefusedError, OSError):
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.05)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock)

    def send(self, msg: RoundMessage) -> None:
        data = encode_message(msg)
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise ConnectionClosed(f"send failed: {exc}") from None

    def send_raw(self, data: bytes) -> None:
        with self._send_lock:
            self._sock.sendall(data)

    def _read_exact(self, n: int, deadline: float | None) -> bytes:
        while len(self._buf) < n:
            if deadline is not None:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TimeoutError("no message within timeout")
                self._sock.settimeout(left)
            else:
                self._sock.settimeout(None)
            try:
                chunk = self._sock.recv(max(65536, n - len(self._buf)))
            except socket.timeout:
                raise TimeoutError("no message within timeout") from None
            except OSError as exc:
                raise ConnectionClosed(f"receive failed: {exc}") from None
            if not chunk:
                if self._buf:
                    raise ProtocolError(
                        f"truncated frame: connection closed after {len(self._buf)} of {n} bytes"
                    )
                raise ConnectionClosed("peer closed the connection")
            self._buf += chunk
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def recv(self, timeout: float | None = None) -> RoundMessage:
        deadline = None if timeout is None else time.monotonic() + timeout
        length = frame_length(self._read_exact(4, deadline))
        return decode_body(self._read_exact(length, deadline), self._version)

    def poll(self) -> bool:
        if self._buf:
            return True
        try:
            ready, _, _ = select.select([self._sock], [], [], 0)
        except (OSError, ValueError):
            return False
        if not ready:
            return False
        try:
            self._sock.setblocking(False)
            peek = self._sock.recv(1, socket.MSG_PEEK)
        except (BlockingIOError, OSError):
            return False
        finally:
            self._sock.setblocking(True)
        return bool(peek)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class Listener:
    """TCP listening socket handing out :class:`SocketConnection` objects."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._sock = socket.create_server((host, port))
        self.address = self._sock.getsockname()[:2]

    def accept(self, timeout: float | None) -> SocketConnection:
        self._sock.settimeout(timeout)
        try:
            sock, _ = self._sock.accept()
        except socket.timeout:
            raise TimeoutError("no connection within timeout") from None
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return SocketConnection(sock)

    def close(self) -> None:
        self._sock.close()

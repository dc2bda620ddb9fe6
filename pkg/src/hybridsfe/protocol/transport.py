"""Moving frames between the two party coroutines.

``inproc`` drives both in one thread.  ``tcp`` forks Bob into a child
process that talks to Alice over a loopback socket.  Each side records the
ordered events it saw (its sends with bodies, its receives); afterwards the
two event lists are merged with the in-process scheduler, so both transports
yield the same canonical message list for the same run.
"""

from __future__ import annotations

import os
import pickle
import socket
import traceback

from ..channel import HEADER, ProtocolError, Recv, Send, check_frame, frame, parse_header, run_local

TRANSPORTS = ("inproc", "tcp")


def run(transport: str, alice, bob):
    if transport == "inproc":
        return run_local(alice, bob)
    if transport == "tcp":
        return run_tcp(alice, bob)
    raise ValueError(f"unknown transport {transport!r} (expected one of {TRANSPORTS})")


# -- socket helpers ------------------------------------------------------------

def _read_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ProtocolError("peer closed the connection mid-frame")
        buf += chunk
    return bytes(buf)


def read_frame(sock):
    n, rnd, kind = parse_header(_read_exact(sock, HEADER.size))
    return rnd, kind, _read_exact(sock, n)


def drive_socket(name: str, gen, sock):
    """Run one party over a connected socket.  Returns (result, events)."""
    events = []
    value = None
    while True:
        try:
            op = gen.send(value)
        except StopIteration as stop:
            return stop.value, events
        value = None
        if isinstance(op, Send):
            body = bytes(op.body)
            sock.sendall(frame(op.round, op.kind, body))
            events.append(("send", op.kind, op.round, body))
        elif isinstance(op, Recv):
            rnd, kind, body = read_frame(sock)
            check_frame(name, op, kind, rnd)
            events.append(("recv", op.kind, op.round, None))
            value = body
        else:
            raise TypeError(f"party {name} yielded {op!r}")


def _replay_events(events, result):
    for ev, kind, rnd, body in events:
        if ev == "send":
            yield Send(kind, body, rnd)
        else:
            yield Recv(kind, rnd)
    return result


def merge_events(alice_events, bob_events, ya=None, yb=None):
    """Rebuild the canonical message order from the two event logs."""
    return run_local(_replay_events(alice_events, ya), _replay_events(bob_events, yb))


# -- fork-based loopback run -----------------------------------------------------

def _write_all(fd, data: bytes):
    view = memoryview(data)
    while view:
        n = os.write(fd, view)
        view = view[n:]


def _read_all(fd) -> bytes:
    chunks = []
    while True:
        c = os.read(fd, 1 << 20)
        if not c:
            return b"".join(chunks)
        chunks.append(c)


def run_tcp(alice, bob, host: str = "127.0.0.1", timeout: float = 600.0):
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, 0))
    srv.listen(1)
    port = srv.getsockname()[1]
    rfd, wfd = os.pipe()
    pid = os.fork()
    if pid == 0:  # Bob
        code = 0
        try:
            os.close(rfd)
            srv.close()
            with socket.create_connection((host, port), timeout=timeout) as sock:
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                out = ("ok",) + drive_socket("bob", bob, sock)
        except BaseException as exc:  # noqa: BLE001 - shipped to the parent
            out = ("err", type(exc).__name__, str(exc), traceback.format_exc())
            code = 1
        try:
            _write_all(wfd, pickle.dumps(out))
        finally:
            os._exit(code)
    os.close(wfd)
    a_err = None
    try:
        srv.settimeout(timeout)
        conn, _ = srv.accept()
        with conn:
            conn.settimeout(timeout)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            try:
                ya, a_events = drive_socket("alice", alice, conn)
            except BaseException as exc:
                a_err = exc
    finally:
        srv.close()
        raw = _read_all(rfd)
        os.close(rfd)
        os.waitpid(pid, 0)
    child = pickle.loads(raw) if raw else ("err", "ChildError", "Bob's process died", "")
    if child[0] == "err":
        if child[1] == "ProtocolError":
            raise ProtocolError(f"bob: {child[2]}") from a_err
        if a_err is not None:
            raise a_err
        raise RuntimeError(f"bob failed: {child[1]}: {child[2]}\n{child[3]}")
    if a_err is not None:
        raise a_err
    yb, b_events = child[1], child[2]
    return merge_events(a_events, b_events, ya, yb)


# -- standalone roles (CLI) --------------------------------------------------------

def serve_alice(gen, port: int, host: str = "127.0.0.1", timeout: float = 600.0):
    """Alice listens; returns (result, events)."""
    with socket.create_server((host, port)) as srv:
        srv.settimeout(timeout)
        conn, _ = srv.accept()
        with conn:
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return drive_socket("alice", gen, conn)


def connect_bob(gen, port: int, host: str = "127.0.0.1", timeout: float = 600.0, retries: int = 50):
    import time
    last = None
    for _ in range(retries):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            break
        except OSError as exc:
            last = exc
            time.sleep(0.1)
    else:
        raise ConnectionError(f"could not reach alice on {host}:{port}: {last}")
    with sock:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return drive_socket("bob", gen, sock)



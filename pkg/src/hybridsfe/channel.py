"""Party coroutines and framing.

Party code is written as generators that ``yield Send(kind, body)`` to emit a
frame and ``yield Recv(kind)`` to wait for one (the yield evaluates to the
body).  Sub-protocols compose with ``yield from``.  Transports only move
frames; the coroutine never sees a socket.

Frame layout: body length (4 bytes, big-endian) | round (4 bytes, big-endian)
| kind (4 ASCII bytes, space padded) | body.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

HEADER = struct.Struct(">II4s")


class ProtocolError(Exception):
    """A peer sent something the protocol does not allow."""


@dataclass(frozen=True)
class Send:
    kind: str
    body: bytes
    round: int = 0


@dataclass(frozen=True)
class Recv:
    kind: str
    round: int = 0


def check_frame(name: str, want: Recv, kind: str, round_no: int):
    if kind != want.kind or round_no != want.round:
        raise ProtocolError(f"{name} expected {want.kind} in round {want.round}, "
                            f"got {kind} in round {round_no}")


def kind_bytes(kind: str) -> bytes:
    raw = kind.encode("ascii")
    if len(raw) > 4:
        raise ValueError(f"frame kind {kind!r} longer than 4 bytes")
    return raw.ljust(4)


def frame(round_no: int, kind: str, body: bytes) -> bytes:
    if len(body) >= 1 << 32:
        raise ProtocolError("frame body too large")
    return HEADER.pack(len(body), round_no, kind_bytes(kind)) + bytes(body)


def parse_header(head: bytes):
    n, rnd, kind = HEADER.unpack(head)
    return n, rnd, kind.decode("ascii").rstrip()


@dataclass(frozen=True)
class Message:
    seq: int
    round: int
    sender: str  # "alice" or "bob"
    kind: str
    body: bytes

    @property
    def wire_bytes(self) -> int:
        return HEADER.size + len(self.body)

    def to_frame(self) -> bytes:
        return frame(self.round, self.kind, self.body)


def run_local(alice, bob, messages: list | None = None):
    """Drive two party coroutines against each other in one thread.

    Alice runs until she blocks on a frame that has not arrived, then Bob,
    and so on.  Returns (alice_result, bob_result, messages).
    """
    if messages is None:
        messages = []
    gens = {"alice": alice, "bob": bob}
    inbox = {"alice": [], "bob": []}
    waiting = {"alice": None, "bob": None}
    started = {"alice": False, "bob": False}
    done = {}
    other = {"alice": "bob", "bob": "alice"}

    def step(name):
        """Advance one party as far as it can go; True if it made progress."""
        gen = gens[name]
        progressed = False
        if not started[name]:
            started[name] = True
            op = _advance(gen, None, done, name)
            progressed = True
        else:
            want = waiting[name]
            if want is None or not inbox[name]:
                return False
            msg = inbox[name].pop(0)
            check_frame(name, want, msg.kind, msg.round)
            waiting[name] = None
            op = _advance(gen, msg.body, done, name)
            progressed = True
        while op is not None:
            if isinstance(op, Send):
                msg = Message(len(messages), op.round, name, op.kind, bytes(op.body))
                messages.append(msg)
                inbox[other[name]].append(msg)
                op = _advance(gen, None, done, name)
            elif isinstance(op, Recv):
                if inbox[name]:
                    msg = inbox[name].pop(0)
                    check_frame(name, op, msg.kind, msg.round)
                    op = _advance(gen, msg.body, done, name)
                else:
                    waiting[name] = op
                    op = None
            else:
                raise TypeError(f"party {name} yielded {op!r}")
        return progressed

    turn = "alice"
    idle = 0
    while len(done) < 2:
        if turn in done:
            turn = other[turn]
            continue
        moved = step(turn)
        idle = 0 if moved else idle + 1
        if idle > 2:
            raise ProtocolError("deadlock: both parties wait for a frame")
        turn = other[turn]
    for name in ("alice", "bob"):
        if inbox[name]:
            raise ProtocolError(f"{name} halted with {len(inbox[name])} unread frame(s)")
    return done["alice"], done["bob"], messages


def _advance(gen, value, done, name):
    try:
        return gen.send(value)
    except StopIteration as stop:
        done[name] = stop.value
        return None

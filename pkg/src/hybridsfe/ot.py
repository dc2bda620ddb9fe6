"""Batched 1-out-of-2 oblivious transfer ("simplest OT" over secp256k1).

    sender                          receiver (choice bits c_j)
    a random, A = aG   --OT1-->
                       <--OT2--     B_j = b_j G           if c_j = 0
                                    B_j = A + b_j G       if c_j = 1
    k0_j = H(j, aB_j)
    k1_j = H(j, aB_j - aA)
    E_j = (X0_j ^ k0_j, X1_j ^ k1_j)  --OT3-->
                                    X_cj = E_j[c_j] ^ H(j, b_j A)

OT1 body: A (33 bytes).  OT2 body: count (4) | token length (2) | B_j...
OT3 body: E_0^0 E_0^1 E_1^0 ...  All points are SEC1-compressed.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from coincurve import PrivateKey, PublicKey

from .channel import HEADER, ProtocolError, Recv, Send, run_local
from .coins import Coins

# secp256k1 group order
ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
POINT_BYTES = 33
MAX_TOKEN = 64
_OT2_HEAD = struct.Struct(">IH")


@dataclass(frozen=True)
class OtSenderInput:
    pairs: tuple[tuple[bytes, bytes], ...]

    def __post_init__(self):
        for j, (x0, x1) in enumerate(self.pairs):
            if len(x0) != len(x1):
                raise ValueError(f"pair {j}: tokens differ in length")
            if len(x0) > MAX_TOKEN:
                raise ValueError(f"pair {j}: tokens longer than {MAX_TOKEN} bytes")
        lengths = {len(x0) for x0, _ in self.pairs}
        if len(lengths) > 1:
            raise ValueError("all pairs in one batch must share a token length")

    @property
    def token_len(self) -> int:
        return len(self.pairs[0][0]) if self.pairs else 0


def _scalar(coins: Coins) -> int:
    while True:
        s = int.from_bytes(coins.bytes(32), "big")
        if 0 < s < ORDER:
            return s


def _load_point(raw: bytes) -> PublicKey:
    try:
        return PublicKey(bytes(raw))
    except Exception as exc:  # coincurve raises ValueError/TypeError on bad encodings
        raise ProtocolError(f"malformed group element: {exc}") from None


def _negate(p: PublicKey) -> PublicKey:
    raw = bytearray(p.format(compressed=True))
    raw[0] ^= 1  # 0x02 <-> 0x03 flips y
    return PublicKey(bytes(raw))


def _pad(j: int, a_point: bytes, shared: PublicKey, n: int) -> bytes:
    h = hashlib.sha512(b"ot-pad" + j.to_bytes(8, "big") + a_point + shared.format(compressed=True))
    return h.digest()[:n]


def _xor(x: bytes, y: bytes) -> bytes:
    return (int.from_bytes(x, "big") ^ int.from_bytes(y, "big")).to_bytes(len(x), "big")


def ot_sender(inp: OtSenderInput, coins: Coins, round_no: int = 0):
    """Sender coroutine; returns b'' (the sender learns nothing)."""
    a = _scalar(coins)
    A = PrivateKey.from_int(a).public_key
    a_bytes = A.format(compressed=True)
    yield Send("OT1", a_bytes, round_no)
    body = yield Recv("OT2", round_no)
    if len(body) < _OT2_HEAD.size:
        raise ProtocolError("OT2 frame too short")
    n, tlen = _OT2_HEAD.unpack_from(body)
    if n != len(inp.pairs) or (n and tlen != inp.token_len):  # an empty batch has no length
        raise ProtocolError(f"OT2 announces {n} transfers of {tlen} bytes, sender has "
                            f"{len(inp.pairs)} of {inp.token_len}")
    if len(body) != _OT2_HEAD.size + n * POINT_BYTES:
        raise ProtocolError("OT2 frame has the wrong length")
    neg_aa = _negate(A.multiply(a.to_bytes(32, "big"))) if n else None
    a_key = a.to_bytes(32, "big")
    out = bytearray()
    off = _OT2_HEAD.size
    for j, (x0, x1) in enumerate(inp.pairs):
        B = _load_point(body[off + j * POINT_BYTES: off + (j + 1) * POINT_BYTES])
        k0 = B.multiply(a_key)
        try:
            k1 = PublicKey.combine_keys([k0, neg_aa])
        except Exception:
            raise ProtocolError("degenerate OT2 element") from None
        out += _xor(x0, _pad(j, a_bytes, k0, tlen))
        out += _xor(x1, _pad(j, a_bytes, k1, tlen))
    yield Send("OT3", bytes(out), round_no)
    return b""


def ot_receiver(choices, token_len: int, coins: Coins, round_no: int = 0):
    """Receiver coroutine; returns the list of chosen tokens."""
    choices = [int(c) & 1 for c in choices]
    if token_len > MAX_TOKEN:
        raise ValueError(f"tokens longer than {MAX_TOKEN} bytes are not supported")
    a_bytes = yield Recv("OT1", round_no)
    A = _load_point(a_bytes)
    bs = [_scalar(coins) for _ in choices]
    body = bytearray(_OT2_HEAD.pack(len(choices), token_len))
    for c, b in zip(choices, bs):
        bG = PrivateKey.from_int(b).public_key
        B = PublicKey.combine_keys([A, bG]) if c else bG
        body += B.format(compressed=True)
    yield Send("OT2", bytes(body), round_no)
    enc = yield Recv("OT3", round_no)
    if len(enc) != 2 * token_len * len(choices):
        raise ProtocolError("OT3 frame has the wrong length")
    a_bytes = A.format(compressed=True)
    out = []
    for j, (c, b) in enumerate(zip(choices, bs)):
        shared = A.multiply(b.to_bytes(32, "big"))
        start = (2 * j + c) * token_len
        out.append(_xor(enc[start:start + token_len], _pad(j, a_bytes, shared, token_len)))
    return out


@dataclass
class OtRun:
    receiver_output: list
    sender_output: bytes
    messages: list


def ot_execute(sender: OtSenderInput, choices, rng: Coins | None = None, round_no: int = 0) -> OtRun:
    """Run both halves over the in-process channel."""
    if len(choices) != len(sender.pairs):
        raise ValueError("choice string length differs from the number of pairs")
    rng = rng or Coins(None, "ot")
    s_out, r_out, msgs = run_local(ot_sender(sender, rng.fork("sender"), round_no),
                                   ot_receiver(choices, sender.token_len, rng.fork("receiver"), round_no))
    return OtRun(r_out, s_out, msgs)


def ot_transcript_bytes(run) -> int:
    msgs = run.messages if hasattr(run, "messages") else run
    return sum(HEADER.size + len(m.body) for m in msgs)


def ot_cost(n: int, token_len: int) -> int:
    """Closed form of ot_transcript_bytes for n transfers."""
    return 3 * HEADER.size + POINT_BYTES + _OT2_HEAD.size + n * (POINT_BYTES + 2 * token_len)

"""Seeded, replayable randomness.

Every party, the enclave and the garbler draw from a ``Coins`` stream.  The
stream is AES-CTR keyed by a hash of (seed, label), so runs are reproducible
from the seed while the output is still a proper pseudorandom stream.  Draws
can be logged so a transcript can carry the coins each party used.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes


def _seed_bytes(seed) -> bytes:
    if seed is None:
        return os.urandom(32)
    if isinstance(seed, (bytes, bytearray)):
        return bytes(seed)
    if isinstance(seed, int):
        return seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
    if isinstance(seed, str):
        return seed.encode()
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


class Coins:
    """Deterministic random byte stream.

    ``Coins(42, "alice")`` and ``Coins(42, "bob")`` are independent streams.
    With ``record=True`` every draw is appended to ``log``.
    """

    def __init__(self, seed=None, label: str = "", record: bool = False):
        root = hashlib.sha256(b"coins\x00" + label.encode() + b"\x00" + _seed_bytes(seed)).digest()
        self._setup(root, label, record)

    def _setup(self, root: bytes, label: str, record: bool):
        self._root = root
        self._enc = Cipher(algorithms.AES(root[:16]), modes.CTR(root[16:32])).encryptor()
        self.label = label
        self.record = record
        self.log: list[bytes] = []

    @property
    def root(self) -> bytes:
        """Seed material; ``Coins.from_root(c.root)`` restarts the same stream."""
        return self._root

    @classmethod
    def from_root(cls, root: bytes, label: str = "") -> "Coins":
        c = cls.__new__(cls)
        c._setup(bytes(root), label, False)
        return c

    def bytes(self, n: int) -> bytes:
        if n < 0:
            raise ValueError("negative length")
        out = self._enc.update(bytes(n))
        if self.record:
            self.log.append(out)
        return out

    def bits(self, n: int) -> np.ndarray:
        raw = np.frombuffer(self.bytes((n + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:n].astype(np.uint8)

    def bit(self) -> int:
        return self.bytes(1)[0] & 1

    def randbelow(self, m: int) -> int:
        if m <= 0:
            raise ValueError("randbelow needs a positive bound")
        nbytes = (m.bit_length() + 7) // 8 + 8
        # 64 surplus bits keep the modulo bias below 2^-64
        return int.from_bytes(self.bytes(nbytes), "big") % m

    def integers(self, low: int, high: int, size: int) -> np.ndarray:
        """``size`` uniform integers in [low, high) (high - low < 2**32)."""
        span = high - low
        if span <= 0 or span > 1 << 32:
            raise ValueError("bad integer range")
        raw = np.frombuffer(self.bytes(16 * size), dtype=np.uint64).reshape(size, 2)
        # 64-bit draw reduced mod a span of at most 2^32: bias below 2^-32
        return (raw[:, 0] % np.uint64(span)).astype(np.int64) + low

    def fork(self, label: str) -> "Coins":
        child = Coins(self._root, f"{self.label}/{label}", record=self.record)
        return child


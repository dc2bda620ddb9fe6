"""AES-128-GCM for the Bob <-> enclave channel.

Nonces are 96 random bits drawn from the caller's coins.  The associated data
names the protocol round and direction so a ciphertext from one round cannot
be replayed into another.  Wire layout: nonce (12) | body | tag (16).
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .coins import Coins

KEY_BYTES = 16
NONCE_BYTES = 12
TAG_BYTES = 16
OVERHEAD = NONCE_BYTES + TAG_BYTES


@dataclass(frozen=True)
class SymKey:
    key: bytes

    def __post_init__(self):
        if len(self.key) != KEY_BYTES:
            raise ValueError(f"key must be {KEY_BYTES} bytes")

    def __repr__(self):
        return "SymKey(<hidden>)"

    def hex(self) -> str:
        return self.key.hex()

    @classmethod
    def from_hex(cls, text: str) -> "SymKey":
        try:
            return cls(bytes.fromhex(text.strip()))
        except ValueError as exc:
            raise ValueError(f"bad key file: {exc}") from None


@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return self.nonce + self.body + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        data = bytes(data)
        if len(data) < OVERHEAD:
            raise ValueError("ciphertext shorter than nonce + tag")
        return cls(data[:NONCE_BYTES], data[NONCE_BYTES:-TAG_BYTES], data[-TAG_BYTES:])

    def __len__(self):
        return len(self.nonce) + len(self.body) + len(self.tag)


def keygen(rng: Coins) -> SymKey:
    return SymKey(rng.bytes(KEY_BYTES))


def round_ad(round_no: int, direction: str) -> bytes:
    """Associated data: round index and 'b2o' (Bob to oracle) or 'o2b'."""
    return b"hybridsfe/" + direction.encode() + b"/" + round_no.to_bytes(4, "big")


def enc(K: SymKey, m: bytes, rng: Coins, ad: bytes = b"") -> Ciphertext:
    nonce = rng.bytes(NONCE_BYTES)
    ct = AESGCM(K.key).encrypt(nonce, bytes(m), ad or None)
    return Ciphertext(nonce, ct[:-TAG_BYTES], ct[-TAG_BYTES:])


def dec(K: SymKey, c: Ciphertext, ad: bytes = b"") -> bytes | None:
    """Plaintext, or None when authentication fails."""
    if len(c.nonce) != NONCE_BYTES or len(c.tag) != TAG_BYTES:
        return None
    try:
        return AESGCM(K.key).decrypt(c.nonce, c.body + c.tag, ad or None)
    except InvalidTag:
        return None

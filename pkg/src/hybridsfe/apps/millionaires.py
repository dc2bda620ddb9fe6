"""Yao's millionaires: Alice learns whether her n-bit number beats Bob's.

Only the two pure modes exist; there is nothing to split.  Ties output 0.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..circuits.core import int_to_bits
from ..circuits.generators import gen_millionaires
from ..coins import Coins
from ..partition import CircuitRealization, PartitionScheme, make_identity
from ..protocol.parties import PiGc, PiHyb

BENCH_SIZES = (1024, 4096, 16384, 262144)


def _nbytes(n_bits: int) -> int:
    return (n_bits + 7) // 8


def to_bytes(x: int, n_bits: int) -> bytes:
    if x < 0 or x.bit_length() > n_bits:
        raise ValueError(f"{x} does not fit in {n_bits} bits")
    return x.to_bytes(_nbytes(n_bits), "big")


def _read(data: bytes, n_bits: int) -> int:
    if len(data) != _nbytes(n_bits):
        raise ValueError(f"expected a {n_bits}-bit number")
    x = int.from_bytes(data, "big")
    if x.bit_length() > n_bits:
        raise ValueError(f"value exceeds {n_bits} bits")
    return x


def compare_plain(n_bits: int):
    def f(a: bytes, b: bytes):
        return bytes([int(_read(a, n_bits) > _read(b, n_bits))]), b""
    return f


def realization(n_bits: int) -> CircuitRealization:
    c = gen_millionaires(n_bits)
    return CircuitRealization(
        c,
        lambda a: int_to_bits(_read(a, n_bits), n_bits),
        lambda b: int_to_bits(_read(b, n_bits), n_bits),
        lambda own, bits: bytes([int(bits[0])]),
    )


@dataclass
class MillionairesApp:
    n_bits: int

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("need at least one bit")
        self._real = None

    def sgx_scheme(self) -> PartitionScheme:
        return make_identity(compare_plain(self.n_bits), "millionaires")

    def gc_realization(self) -> CircuitRealization:
        if self._real is None:
            self._real = realization(self.n_bits)
        return self._real

    def protocol(self, mode: str):
        if mode in ("sgx", "naive"):
            # comparing two integers has no secret-dependent memory access, so
            # the hardened and naive enclave programs coincide
            return PiHyb(self.sgx_scheme())
        if mode == "gc":
            return PiGc(self.gc_realization())
        if mode == "hybrid":
            raise ValueError("millionaires has no hybrid split; use sgx or gc")
        raise ValueError(f"unknown mode {mode!r}")

    def instance(self, seed):
        c = Coins(seed, "millionaires/instance")
        return c.randbelow(1 << self.n_bits), c.randbelow(1 << self.n_bits)

    def inputs(self, a: int, b: int):
        return to_bytes(a, self.n_bits), to_bytes(b, self.n_bits)

    def oracle(self, a: int, b: int) -> int:
        return int(a > b)


def build_millionaires(n_bits: int) -> dict:
    app = MillionairesApp(n_bits)
    return {"sgx_scheme": app.sgx_scheme(), "gc_scheme": app.gc_realization()}



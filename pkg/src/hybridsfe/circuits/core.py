"""Gate-list boolean circuits.

Wires 0..n-1 are inputs (Alice's bits first, then Bob's).  Every other wire is
the output of exactly one gate.  Gates are kept as parallel numpy arrays so the
garbler and the plain evaluator can work a whole batch at a time; ``schedule``
groups gates into batches of one kind whose inputs are all ready.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

XOR, AND, OR, NOT, CONST = 0, 1, 2, 3, 4
KIND_NAMES = ("XOR", "AND", "OR", "NOT", "CONST")
KIND_CODES = {name: code for code, name in enumerate(KIND_NAMES)}
ARITY = (2, 2, 2, 1, 0)


class CircuitError(ValueError):
    """Malformed circuit or circuit file."""


class CircuitBudgetError(CircuitError):
    """A generator would exceed its gate or wire budget."""


@dataclass(frozen=True)
class Gate:
    kind: str
    in_wires: tuple[int, ...]
    out_wire: int
    value: int = 0  # only meaningful for CONST


def as_bits(x, n: int | None = None) -> np.ndarray:
    """Coerce a bitstring ('0101', list of ints, array) to a uint8 array."""
    if isinstance(x, str):
        if any(ch not in "01" for ch in x):
            raise ValueError(f"not a bitstring: {x!r}")
        arr = np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(x, dtype=np.uint8).ravel()
        if arr.size and arr.max() > 1:
            raise ValueError("bit values must be 0 or 1")
    if n is not None and arr.size != n:
        raise ValueError(f"expected {n} bits, got {arr.size}")
    return arr.astype(np.uint8, copy=False)


def int_to_bits(v: int, width: int) -> np.ndarray:
    """Big-endian (MSB first) bits of a non-negative integer."""
    if v < 0 or v >> width:
        raise ValueError(f"{v} does not fit in {width} bits")
    raw = v.to_bytes((width + 7) // 8, "big")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    return bits[bits.size - width:]


def bits_to_int(bits) -> int:
    b = as_bits(bits)
    if b.size == 0:
        return 0
    pad = (-b.size) % 8
    packed = np.packbits(np.concatenate([np.zeros(pad, np.uint8), b]))
    return int.from_bytes(packed.tobytes(), "big")


def bits_to_str(bits) -> str:
    return "".join("1" if v else "0" for v in as_bits(bits))


class Circuit:
    """Immutable gate-list circuit.

    ``schedule`` is a list of (kind, start, stop) gate ranges.  Builder-made
    circuits supply it directly; parsed ones get it from a levelization pass
    (gates are then stored in level order).
    """

    def __init__(self, wire_count, alice_input_bits, bob_input_bits, output_wires,
                 kinds, in1, in2, outs, schedule=None, validate=True):
        self.wire_count = int(wire_count)
        self.alice_input_bits = int(alice_input_bits)
        self.bob_input_bits = int(bob_input_bits)
        self.output_wires = np.asarray(output_wires, dtype=np.int32)
        self.kinds = np.asarray(kinds, dtype=np.int8)
        self.in1 = np.asarray(in1, dtype=np.int32)
        self.in2 = np.asarray(in2, dtype=np.int32)
        self.outs = np.asarray(outs, dtype=np.int32)
        for arr in (self.output_wires, self.kinds, self.in1, self.in2, self.outs):
            arr.flags.writeable = False
        if validate:
            self.validate()
        if schedule is None:
            schedule = self._levelize()
        self.schedule = list(schedule)

    @property
    def input_count(self) -> int:
        return self.alice_input_bits + self.bob_input_bits

    @property
    def gate_count(self) -> int:
        return int(self.kinds.size)

    def count(self, kind: int) -> int:
        return int(np.count_nonzero(self.kinds == kind))

    @cached_property
    def gates(self) -> list[Gate]:
        out = []
        for k, a, b, o in zip(self.kinds.tolist(), self.in1.tolist(), self.in2.tolist(), self.outs.tolist()):
            ar = ARITY[k]
            if k == CONST:
                out.append(Gate("CONST", (), o, a))
            else:
                out.append(Gate(KIND_NAMES[k], (a, b)[:ar], o))
        return out

    def validate(self):
        n_in = self.input_count
        if n_in > self.wire_count:
            raise CircuitError("more input wires than wires")
        m = self.gate_count
        if not (self.in1.size == self.in2.size == self.outs.size == m):
            raise CircuitError("gate arrays differ in length")
        if m and (self.kinds.min() < 0 or self.kinds.max() > CONST):
            raise CircuitError("unknown gate kind")
        if m and (self.outs.min() < n_in or self.outs.max() >= self.wire_count):
            raise CircuitError("gate output outside the non-input wire range")
        defined_at = np.full(self.wire_count, m + 1, dtype=np.int64)
        defined_at[:n_in] = -1
        if np.unique(self.outs).size != m:
            raise CircuitError("duplicate out_wire")
        defined_at[self.outs] = np.arange(m)
        gate_idx = np.arange(m)
        arity = np.asarray(ARITY, dtype=np.int64)[self.kinds]
        for slot, arr in ((1, self.in1), (2, self.in2)):
            used = arity >= slot
            refs = arr[used]
            if refs.size and (refs.min() < 0 or refs.max() >= self.wire_count):
                raise CircuitError("gate input references a wire outside the circuit")
            late = defined_at[refs] >= gate_idx[used]
            if late.any():
                g = int(gate_idx[used][late][0])
                raise CircuitError(f"gate {g} reads wire {int(refs[late][0])} before it is defined")
        consts = self.in1[self.kinds == CONST]
        if consts.size and consts.max() > 1:
            raise CircuitError("CONST value must be 0 or 1")
        ow = self.output_wires
        if ow.size and (ow.min() < 0 or ow.max() >= self.wire_count):
            raise CircuitError("output wire outside the circuit")
        if ow.size and (defined_at[ow] > m).any():
            raise CircuitError("output wire is never defined")

    def _levelize(self):
        level = np.zeros(self.wire_count, dtype=np.int64)
        glev = np.zeros(self.gate_count, dtype=np.int64)
        kinds, in1, in2, outs = self.kinds.tolist(), self.in1.tolist(), self.in2.tolist(), self.outs.tolist()
        lv = level.tolist()
        for g in range(len(kinds)):
            k = kinds[g]
            if k == CONST:
                l = 1
            elif k == NOT:
                l = lv[in1[g]] + 1
            else:
                l = max(lv[in1[g]], lv[in2[g]]) + 1
            lv[outs[g]] = l
            glev[g] = l
        order = np.lexsort((self.kinds, glev))
        if not np.array_equal(order, np.arange(order.size)):
            # store gates in level order so each schedule entry is a contiguous range
            for name in ("kinds", "in1", "in2", "outs"):
                arr = getattr(self, name)[order]
                arr.flags.writeable = False
                setattr(self, name, arr)
            glev = glev[order]
        sched = []
        if glev.size:
            key = glev * 8 + self.kinds
            cuts = np.flatnonzero(np.diff(key)) + 1
            starts = np.concatenate([[0], cuts])
            stops = np.concatenate([cuts, [key.size]])
            for s, e in zip(starts.tolist(), stops.tolist()):
                sched.append((int(self.kinds[s]), s, e))
        return sched

    def __repr__(self):
        return (f"Circuit(wires={self.wire_count}, inA={self.alice_input_bits}, "
                f"inB={self.bob_input_bits}, gates={self.gate_count}, outputs={self.output_wires.size})")


def circuit_from_gates(wire_count, alice_bits, bob_bits, output_wires, gates) -> Circuit:
    kinds, in1, in2, outs = [], [], [], []
    for g in gates:
        k = KIND_CODES[g.kind]
        if k == CONST:
            a, b = g.value, 0
        else:
            ins = tuple(g.in_wires)
            if len(ins) != ARITY[k]:
                raise CircuitError(f"{g.kind} gate needs {ARITY[k]} inputs")
            a = ins[0]
            b = ins[1] if len(ins) > 1 else 0
        kinds.append(k)
        in1.append(a)
        in2.append(b)
        outs.append(g.out_wire)
    return Circuit(wire_count, alice_bits, bob_bits, output_wires, kinds, in1, in2, outs)


def parse_circuit(text) -> Circuit:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise CircuitError(f"circuit file is not ASCII: {exc}") from None
    header = None
    kinds, in1, in2, outs = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if header is None:
            if len(tok) == 7:
                tok.append("")  # no output wires
            if len(tok) != 8 or tok[0] != "wires" or tok[2] != "inA" or tok[4] != "inB" or tok[6] != "out":
                raise CircuitError(f"line {lineno}: bad header, expected 'wires N inA l inB r out w1,w2,...'")
            try:
                n, l, r = int(tok[1]), int(tok[3]), int(tok[5])
                ow = [int(w) for w in tok[7].split(",") if w != ""]
            except ValueError:
                raise CircuitError(f"line {lineno}: non-integer field in header") from None
            if min(n, l, r) < 0:
                raise CircuitError(f"line {lineno}: negative count in header")
            header = (n, l, r, ow)
            continue
        kind = tok[0]
        if kind not in KIND_CODES:
            raise CircuitError(f"line {lineno}: unknown gate kind {kind!r}")
        k = KIND_CODES[kind]
        want = max(ARITY[k], 1) + 1
        if len(tok) != 1 + want:
            raise CircuitError(f"line {lineno}: {kind} takes {want} operands, got {len(tok) - 1}")
        try:
            nums = [int(t) for t in tok[1:]]
        except ValueError:
            raise CircuitError(f"line {lineno}: non-integer operand") from None
        if min(nums) < 0:
            raise CircuitError(f"line {lineno}: negative wire id")
        if k == CONST and nums[0] > 1:
            raise CircuitError(f"line {lineno}: CONST value must be 0 or 1")
        if k != CONST and max(nums) >= header[0]:
            raise CircuitError(f"line {lineno}: wire {max(nums)} outside 0..{header[0] - 1}")
        kinds.append(k)
        in1.append(nums[0])
        in2.append(nums[1] if len(nums) == 3 else 0)
        outs.append(nums[-1])
    if header is None:
        raise CircuitError("line 1: empty circuit file")
    n, l, r, ow = header
    return Circuit(n, l, r, ow, kinds, in1, in2, outs)


def serialize_circuit(c: Circuit) -> bytes:
    lines = [f"wires {c.wire_count} inA {c.alice_input_bits} inB {c.bob_input_bits} out "
             + ",".join(str(w) for w in c.output_wires.tolist())]
    for k, a, b, o in zip(c.kinds.tolist(), c.in1.tolist(), c.in2.tolist(), c.outs.tolist()):
        if ARITY[k] == 2:
            lines.append(f"{KIND_NAMES[k]} {a} {b} {o}")
        else:
            lines.append(f"{KIND_NAMES[k]} {a} {o}")
    return ("\n".join(lines) + "\n").encode("ascii")


def eval_plain(c: Circuit, a, b) -> np.ndarray:
    a = as_bits(a)
    b = as_bits(b)
    if a.size != c.alice_input_bits or b.size != c.bob_input_bits:
        raise ValueError(f"input length mismatch: got ({a.size}, {b.size}), "
                         f"circuit wants ({c.alice_input_bits}, {c.bob_input_bits})")
    val = np.zeros(c.wire_count, dtype=np.uint8)
    ready = np.zeros(c.wire_count, dtype=bool)
    n_in = c.input_count
    val[:c.alice_input_bits] = a
    val[c.alice_input_bits:n_in] = b
    ready[:n_in] = True
    kinds, in1, in2, outs = c.kinds, c.in1, c.in2, c.outs
    for kind, s, e in c.schedule:
        o = outs[s:e]
        if kind == CONST:
            val[o] = in1[s:e]
        else:
            x = in1[s:e]
            assert ready[x].all(), "read of an undefined wire"
            if kind == NOT:
                val[o] = val[x] ^ 1
            else:
                y = in2[s:e]
                assert ready[y].all(), "read of an undefined wire"
                if kind == XOR:
                    val[o] = val[x] ^ val[y]
                elif kind == AND:
                    val[o] = val[x] & val[y]
                else:
                    val[o] = val[x] | val[y]
        ready[o] = True
    assert ready[c.output_wires].all(), "output wire never written"
    return val[c.output_wires].copy()

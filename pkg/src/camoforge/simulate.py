"""Two-valued evaluation, truth tables, equivalence checks and the oracle.

Evaluation is bit-parallel: every net carries a Python integer whose bit ``i``
is the net's value under the ``i``-th input pattern. A single vector is just
the width-1 case.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

from .netlist import Netlist, is_lut, is_obfuscated, ordered_gates
from .rng import SplitMix64

EXHAUSTIVE_LIMIT = 16
TRUTH_TABLE_CAP = 20


class SimulationError(ValueError):
    pass


class VectorLengthError(SimulationError):
    pass


class UnrealizedGateError(SimulationError):
    """An obfuscated cell (CAMO2/LUTn) has no known function."""


def parse_vector(text: str) -> tuple[int, ...]:
    text = text.strip()
    if any(c not in "01" for c in text):
        raise SimulationError(f"vector {text!r} must contain only 0/1")
    return tuple(int(c) for c in text)


def format_vector(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def gate_op(kind: str, ins: Sequence[int], mask: int) -> int:
    """Bit-parallel value of a plain gate (``mask`` has one bit per pattern)."""
    if kind == "AND2":
        return ins[0] & ins[1]
    if kind == "OR2":
        return ins[0] | ins[1]
    if kind == "NAND2":
        return ~(ins[0] & ins[1]) & mask
    if kind == "NOR2":
        return ~(ins[0] | ins[1]) & mask
    if kind == "XOR2":
        return ins[0] ^ ins[1]
    if kind == "XNOR2":
        return ~(ins[0] ^ ins[1]) & mask
    if kind == "NOT":
        return ~ins[0] & mask
    if kind == "BUF":
        return ins[0]
    if kind == "MUX2":
        sel, a, b = ins
        return (a & ~sel | b & sel) & mask
    if kind == "CONST0":
        return 0
    if kind == "CONST1":
        return mask
    if is_obfuscated(kind):
        raise UnrealizedGateError(f"{kind} has no function in this netlist")
    raise SimulationError(f"unknown gate kind {kind}")


def lut_op(table: str, ins: Sequence[int], mask: int) -> int:
    """Bit-parallel LUT: bit i of ``table`` is the output for big-endian input value i."""
    out = 0
    n = len(ins)
    for idx, bit in enumerate(table):
        if bit != "1":
            continue
        term = mask
        for j, x in enumerate(ins):
            term &= x if (idx >> (n - 1 - j)) & 1 else ~x
        out |= term
    return out & mask


def simulate_patterns(
    n: Netlist,
    patterns: Sequence[int],
    width: int,
    state: dict[str, int] | None = None,
    luts: dict[str, str] | None = None,
) -> dict[str, int]:
    """Value of every net for ``width`` input patterns at once.

    ``patterns[j]`` is the packed column for input ``j``. Flop outputs take
    their value from ``state`` (default: init bits). ``luts`` optionally
    supplies LUT tables so partially realized netlists can be simulated.
    """
    if len(patterns) != len(n.inputs):
        raise VectorLengthError(f"expected {len(n.inputs)} input columns, got {len(patterns)}")
    mask = (1 << width) - 1
    val: dict[str, int] = dict(zip(n.inputs, (p & mask for p in patterns)))
    for f in n.flops:
        bit = f.init if state is None else state.get(f.q, f.init)
        val[f.q] = mask if bit else 0
    for g in ordered_gates(n):
        ins = [val[i] for i in g.inputs]
        if luts is not None and g.id in luts and is_lut(g.kind):
            val[g.output] = lut_op(luts[g.id], ins, mask)
        else:
            val[g.output] = gate_op(g.kind, ins, mask)
    return val


def evaluate(n: Netlist, bits: Sequence[int], state: dict[str, int] | None = None) -> tuple[int, ...]:
    """Outputs of ``n`` for one input vector (flops at init or given ``state``)."""
    if len(bits) != len(n.inputs):
        raise VectorLengthError(f"expected {len(n.inputs)} input bits, got {len(bits)}")
    val = simulate_patterns(n, [1 if b else 0 for b in bits], 1, state)
    return tuple(val[o] for o in n.outputs)


def run_cycles(n: Netlist, vectors: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Clocked simulation from the init state; one output vector per cycle."""
    state = {f.q: f.init for f in n.flops}
    trace = []
    for bits in vectors:
        if len(bits) != len(n.inputs):
            raise VectorLengthError(f"expected {len(n.inputs)} input bits, got {len(bits)}")
        val = simulate_patterns(n, list(bits), 1, state)
        trace.append(tuple(val[o] for o in n.outputs))
        state = {f.q: val[f.d] for f in n.flops}
    return trace


def pack_vectors(vectors: Sequence[Sequence[int]], k: int) -> list[int]:
    """Transpose vectors into per-input packed columns (vector i -> bit i)."""
    cols = [0] * k
    for i, v in enumerate(vectors):
        for j in range(k):
            if v[j]:
                cols[j] |= 1 << i
    return cols


def unpack_columns(cols: Sequence[int], count: int) -> list[tuple[int, ...]]:
    return [tuple((c >> i) & 1 for c in cols) for i in range(count)]


def exhaustive_columns(k: int) -> list[int]:
    """Packed input columns enumerating all 2^k vectors in big-endian order."""
    total = 1 << k
    cols = []
    for j in range(k):
        block = 1 << (k - 1 - j)
        pat = ((1 << block) - 1) << block
        span = 2 * block
        while span < total:
            pat |= pat << span
            span *= 2
        cols.append(pat & ((1 << total) - 1))
    return cols


def output_columns(n: Netlist) -> list[int]:
    """Packed output columns over all 2^k inputs (big-endian row order)."""
    k = len(n.inputs)
    if k > TRUTH_TABLE_CAP:
        raise SimulationError(f"{k} inputs exceeds the truth-table cap of {TRUTH_TABLE_CAP}")
    val = simulate_patterns(n, exhaustive_columns(k), 1 << k)
    return [val[o] for o in n.outputs]


def truth_table(n: Netlist) -> list[tuple[int, ...]]:
    """Output rows for every input vector; row i is the big-endian encoding of i."""
    cols = output_columns(n)
    return unpack_columns(cols, 1 << len(n.inputs))


def int_to_bits(i: int, k: int) -> tuple[int, ...]:
    return tuple((i >> (k - 1 - j)) & 1 for j in range(k))


def random_vectors(k: int, count: int, seed: int) -> list[tuple[int, ...]]:
    rng = SplitMix64(seed)
    return [int_to_bits(rng.bits(k), k) for _ in range(count)]


@dataclass(frozen=True)
class Equivalence:
    equal: bool
    counterexample: tuple[int, ...] | None = None
    exhaustive: bool = True

    def __bool__(self) -> bool:
        return self.equal


def _first_diff(a_cols, b_cols) -> int | None:
    diff = 0
    for x, y in zip(a_cols, b_cols):
        diff |= x ^ y
    if not diff:
        return None
    return (diff & -diff).bit_length() - 1


def equivalent(
    a: Netlist,
    b: Netlist,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    samples: int = 10_000,
    seed: int = 0,
) -> Equivalence:
    """Compare input/output behavior of two combinational netlists.

    Exhaustive when the input count is at most ``exhaustive_limit``, otherwise
    ``samples`` SplitMix64-seeded random vectors. Any counterexample returned
    has been re-checked by single-vector evaluation.
    """
    if len(a.inputs) != len(b.inputs) or len(a.outputs) != len(b.outputs):
        raise VectorLengthError("netlists differ in input/output arity")
    k = len(a.inputs)
    if k <= exhaustive_limit:
        ca, cb = output_columns(a), output_columns(b)
        idx = _first_diff(ca, cb)
        if idx is None:
            return Equivalence(True)
        cex = int_to_bits(idx, k)
        exhaustive = True
    else:
        vecs = random_vectors(k, samples, seed)
        cols = pack_vectors(vecs, k)
        va = simulate_patterns(a, cols, samples)
        vb = simulate_patterns(b, cols, samples)
        idx = _first_diff([va[o] for o in a.outputs], [vb[o] for o in b.outputs])
        if idx is None:
            return Equivalence(True, exhaustive=False)
        cex = vecs[idx]
        exhaustive = False
    assert evaluate(a, cex) != evaluate(b, cex)
    return Equivalence(False, cex, exhaustive)


class Oracle:
    """Black-box access to a realized circuit: inputs in, outputs out.

    Only the input/output mapping and the query counter are exposed; each
    evaluated vector counts as one query.
    """

    def __init__(self, realized: Netlist):
        self.__realized = realized
        self.__lock = threading.Lock()
        self.query_count = 0
        self.num_inputs = len(realized.inputs)
        self.num_outputs = len(realized.outputs)

    def query(self, bits: Sequence[int]) -> tuple[int, ...]:
        if len(bits) != self.num_inputs:
            raise VectorLengthError(f"expected {self.num_inputs} input bits, got {len(bits)}")
        with self.__lock:
            out = evaluate(self.__realized, bits)
            self.query_count += 1
        return out

    def query_columns(self, cols: Sequence[int], width: int) -> list[int]:
        """Batch query of ``width`` packed vectors; counts ``width`` queries."""
        if len(cols) != self.num_inputs:
            raise VectorLengthError(f"expected {self.num_inputs} input columns, got {len(cols)}")
        with self.__lock:
            val = simulate_patterns(self.__realized, cols, width)
            self.query_count += width
        return [val[o] for o in self.__realized.outputs]


def oracle_query(o: Oracle, bits: Sequence[int]) -> tuple[int, ...]:
    return o.query(bits)


def write_trace(rows: Iterable[tuple[Sequence[int], Sequence[int]]]) -> str:
    return "".join(f"{format_vector(i)},{format_vector(o)}\n" for i, o in rows)

"""Oracle-guided SAT deobfuscation.

The attacker holds the apparent netlist and a working chip (the oracle). Each
suspect gate gets key variables selecting one of its candidate functions. A
miter over two key copies finds a distinguishing input: an input on which two
keys, both consistent with every observation so far, disagree. The oracle is
queried there, the observation is added for both copies, and the loop repeats
until no distinguishing input exists. Any key consistent with the
observations is then functionally correct.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from .netlist import Netlist, gate_arity, is_lut, ordered_gates
from .obfuscate import CAMO_FUNCTIONS, Secret, realize
from .sat import BudgetExceeded, Cnf, Solver
from .simulate import Oracle, exhaustive_columns, pack_vectors, random_vectors, simulate_patterns

DECLARED = "declared"
EVERY_GATE = "all"

# 2-bit codes; the fourth code point is forbidden by a clause
CAMO_CODES = {"NAND": (0, 0), "NOR": (0, 1), "XOR": (1, 0)}
SUSPECT_CODES = {"apparent": (0, 0), "SA0": (0, 1), "SA1": (1, 0)}


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class SuspicionModel:
    """Which gates the attacker distrusts and what each might really be.

    ``declared``: only CAMO2 cells (NAND/NOR/XOR) and LUTs (any table).
    ``all``: additionally every plain gate may be its apparent function or
    have its output stuck at 0 or 1.
    """

    mode: str = DECLARED

    def __post_init__(self):
        if self.mode not in (DECLARED, EVERY_GATE):
            raise AttackError(f"unknown suspicion mode {self.mode!r}")

    def suspects(self, apparent: Netlist) -> list[str]:
        out = []
        for g in apparent.gates:
            if g.kind == "CAMO2" or is_lut(g.kind):
                out.append(g.id)
            elif self.mode == EVERY_GATE:
                out.append(g.id)
        return out

    def candidate_count(self, g) -> int:
        if g.kind == "CAMO2":
            return 3
        if is_lut(g.kind):
            return 1 << (1 << gate_arity(g.kind))
        return 3 if self.mode == EVERY_GATE else 1

    def candidates(self, g) -> list:
        """Explicit candidate list (LUT tables enumerated; keep LUTs small)."""
        if g.kind == "CAMO2":
            return list(CAMO_FUNCTIONS)
        if is_lut(g.kind):
            n = 1 << gate_arity(g.kind)
            return [format(t, f"0{n}b") for t in range(1 << n)]
        return list(SUSPECT_CODES) if self.mode == EVERY_GATE else ["apparent"]


# ---------------------------------------------------------------------------
# encoding


class CircuitEncoder:
    """Structurally hashed, constant-folding Tseitin encoder for keyed circuits.

    ``sink`` is anything with ``new_var()`` and ``add_clause(lits)`` (a
    ``Solver`` or a ``Cnf``). Signals are DIMACS literals; constants are the
    literal of a dedicated always-true variable (``self.true``) or its
    negation. Identical gates over identical literals share one variable, so
    logic outside the fanout of the keys is encoded once across copies.
    """

    def __init__(self, apparent: Netlist, model: SuspicionModel, sink):
        if apparent.flops:
            raise AttackError("attacks run on the combinational frame; remove flops first")
        self.apparent = apparent
        self.model = model
        self.sink = sink
        self.gates = ordered_gates(apparent)
        self.suspects = model.suspects(apparent)
        self._suspect_set = set(self.suspects)
        self.true = sink.new_var()
        sink.add_clause([self.true])
        self._and: dict = {}
        self._xor: dict = {}
        self._mux: dict = {}

    # -- primitives ------------------------------------------------------

    def const(self, bit: int) -> int:
        return self.true if bit else -self.true

    def AND(self, a: int, b: int) -> int:
        T = self.true
        if a == -T or b == -T or a == -b:
            return -T
        if a == T or a == b:
            return b
        if b == T:
            return a
        if a > b:
            a, b = b, a
        key = (a, b)
        o = self._and.get(key)
        if o is None:
            o = self.sink.new_var()
            add = self.sink.add_clause
            add([-o, a])
            add([-o, b])
            add([o, -a, -b])
            self._and[key] = o
        return o

    def OR(self, a: int, b: int) -> int:
        return -self.AND(-a, -b)

    def XOR(self, a: int, b: int) -> int:
        T = self.true
        if abs(a) == T:
            return -b if a == T else b
        if abs(b) == T:
            return -a if b == T else a
        if a == b:
            return -T
        if a == -b:
            return T
        neg = (a < 0) != (b < 0)
        a, b = abs(a), abs(b)
        if a > b:
            a, b = b, a
        key = (a, b)
        o = self._xor.get(key)
        if o is None:
            o = self.sink.new_var()
            add = self.sink.add_clause
            add([-o, a, b])
            add([-o, -a, -b])
            add([o, -a, b])
            add([o, a, -b])
            self._xor[key] = o
        return -o if neg else o

    def MUX(self, s: int, a: int, b: int) -> int:
        """s ? b : a"""
        T = self.true
        if s == T:
            return b
        if s == -T:
            return a
        if a == b:
            return a
        if a == -b:
            return self.XOR(s, a)
        if a == -T:
            return self.AND(s, b)
        if a == T:
            return self.OR(-s, b)
        if b == -T:
            return self.AND(-s, a)
        if b == T:
            return self.OR(s, a)
        if s < 0:
            s, a, b = -s, b, a
        key = (s, a, b)
        o = self._mux.get(key)
        if o is None:
            o = self.sink.new_var()
            add = self.sink.add_clause
            add([-s, -b, o])
            add([-s, b, -o])
            add([s, -a, o])
            add([s, a, -o])
            add([-a, -b, o])
            add([a, b, -o])
            self._mux[key] = o
        return o

    def plain(self, kind: str, ins: Sequence[int]) -> int:
        T = self.true
        if kind == "AND2":
            return self.AND(ins[0], ins[1])
        if kind == "OR2":
            return self.OR(ins[0], ins[1])
        if kind == "NAND2":
            return -self.AND(ins[0], ins[1])
        if kind == "NOR2":
            return self.AND(-ins[0], -ins[1])
        if kind == "XOR2":
            return self.XOR(ins[0], ins[1])
        if kind == "XNOR2":
            return -self.XOR(ins[0], ins[1])
        if kind == "NOT":
            return -ins[0]
        if kind == "BUF":
            return ins[0]
        if kind == "MUX2":
            return self.MUX(ins[0], ins[1], ins[2])
        if kind == "CONST0":
            return -T
        if kind == "CONST1":
            return T
        raise AttackError(f"unsupported gate kind {kind}")

    def lut(self, ins: Sequence[int], table: Sequence[int]) -> int:
        """Key bit ``table[i]`` selected by the big-endian input value i."""

        def node(lo: int, depth: int) -> int:
            if depth == len(ins):
                return table[lo]
            half = 1 << (len(ins) - depth - 1)
            return self.MUX(ins[depth], node(lo, depth + 1), node(lo + half, depth + 1))

        return node(0, 0)

    # -- keys and circuit copies -----------------------------------------

    def new_key(self) -> dict[str, list[int]]:
        """Fresh key variables for every suspect gate, with forbidden codes blocked."""
        key = {}
        by_id = {g.id: g for g in self.apparent.gates}
        for gid in self.suspects:
            g = by_id[gid]
            if is_lut(g.kind):
                key[gid] = [self.sink.new_var() for _ in range(1 << gate_arity(g.kind))]
            else:
                k1, k0 = self.sink.new_var(), self.sink.new_var()
                self.sink.add_clause([-k1, -k0])
                key[gid] = [k1, k0]
        return key

    def encode(self, inputs: Sequence[int], key: dict[str, list[int]]) -> list[int]:
        """Output literals of the keyed circuit for the given input literals."""
        sig = dict(zip(self.apparent.inputs, inputs))
        for g in self.gates:
            ins = [sig[i] for i in g.inputs]
            if g.kind == "CAMO2":
                k1, k0 = key[g.id]
                nand = -self.AND(ins[0], ins[1])
                nor = self.AND(-ins[0], -ins[1])
                xor = self.XOR(ins[0], ins[1])
                out = self.MUX(k1, self.MUX(k0, nand, nor), xor)
            elif is_lut(g.kind):
                out = self.lut(ins, key[g.id])
            else:
                out = self.plain(g.kind, ins)
                if g.id in self._suspect_set:
                    s1, s0 = key[g.id]
                    out = self.OR(s1, self.AND(-s0, out))
            sig[g.output] = out
        return [sig[o] for o in self.apparent.outputs]


def encode_keyed(apparent: Netlist, s: SuspicionModel) -> tuple[CircuitEncoder, dict[str, list[int]]]:
    """Encoder writing into a fresh ``Cnf`` plus one key copy's variables."""
    enc = CircuitEncoder(apparent, s, Cnf())
    return enc, enc.new_key()


def decode_key(apparent: Netlist, model: SuspicionModel, key_vars: dict[str, list[int]], value) -> dict:
    """KeyAssignment (gate id -> candidate) from a solver model."""
    kinds = {g.id: g.kind for g in apparent.gates}
    out = {}
    for gid, bits in key_vars.items():
        vals = tuple(int(value(b)) for b in bits)
        if kinds[gid] == "CAMO2":
            out[gid] = {v: k for k, v in CAMO_CODES.items()}[vals]
        elif is_lut(kinds[gid]):
            out[gid] = "".join(map(str, vals))
        else:
            out[gid] = {v: k for k, v in SUSPECT_CODES.items()}[vals]
    return out


def key_to_secret(apparent: Netlist, key: dict) -> Secret:
    kinds = {g.id: g.kind for g in apparent.gates}
    camo, lut, stuck = {}, {}, {}
    for gid, choice in key.items():
        if kinds[gid] == "CAMO2":
            camo[gid] = choice
        elif is_lut(kinds[gid]):
            lut[gid] = choice
        elif choice in ("SA0", "SA1"):
            stuck[gid] = 1 if choice == "SA1" else 0
    return Secret(camo=camo, lut=lut, stuck=stuck)


def realize_key(apparent: Netlist, key: dict) -> Netlist:
    return realize(apparent, key_to_secret(apparent, key))


# ---------------------------------------------------------------------------
# the attack


@dataclass
class AttackLimits:
    max_queries: int = 10_000
    max_conflicts: int = 1_000_000  # per solver call
    time_limit_s: float = 600.0


@dataclass
class AttackResult:
    key: dict
    oracle_queries: int
    solver_calls: int
    conflicts: int
    wall_time: float
    verified: bool
    reason: str = ""
    observations: list = field(default_factory=list, repr=False)

    def report(self, apparent: Netlist) -> dict:
        return {
            "queries": self.oracle_queries,
            "solver_calls": self.solver_calls,
            "conflicts": self.conflicts,
            "wall_time_s": round(self.wall_time, 6),
            "verified": self.verified,
            "key": key_to_secret(apparent, self.key).to_dict() if self.key else Secret().to_dict(),
        }


class MiterSession:
    """Incremental miter over two key copies, extended one observation at a time."""

    def __init__(self, apparent: Netlist, model: SuspicionModel, heuristic: str = "vsids"):
        self.apparent = apparent
        self.model = model
        self.solver = Solver(heuristic)
        self.enc = CircuitEncoder(apparent, model, self.solver)
        self.key_a = self.enc.new_key()
        self.key_b = self.enc.new_key()
        self.x = [self.solver.new_var() for _ in apparent.inputs]
        outs_a = self.enc.encode(self.x, self.key_a)
        outs_b = self.enc.encode(self.x, self.key_b)
        self.act = self.solver.new_var()
        diffs = [self.enc.XOR(a, b) for a, b in zip(outs_a, outs_b)]
        self.can_differ = not all(d == -self.enc.true for d in diffs)
        self.solver.add_clause([-self.act] + [d for d in diffs if d != -self.enc.true])
        self.observations: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
        self.calls = 0

    def add_observation(self, bits: Sequence[int], outs: Sequence[int]) -> None:
        lits = [self.enc.const(b) for b in bits]
        for key in (self.key_a, self.key_b):
            for lit, want in zip(self.enc.encode(lits, key), outs):
                self.solver.add_clause([lit if want else -lit])
        self.observations.append((tuple(bits), tuple(outs)))

    def _solve(self, assumptions, limits: AttackLimits, deadline: float) -> bool:
        self.calls += 1
        return self.solver.solve(assumptions, conflict_budget=limits.max_conflicts, deadline=deadline)

    def distinguishing_input(self, limits: AttackLimits, deadline: float):
        """(input, key_a, key_b) for a distinguishing input, or None."""
        if not self.key_a or not self.can_differ:
            return None
        if not self._solve([self.act], limits, deadline):
            return None
        v = self.solver.value
        x = tuple(int(v(l)) for l in self.x)
        ka = decode_key(self.apparent, self.model, self.key_a, v)
        kb = decode_key(self.apparent, self.model, self.key_b, v)
        return x, ka, kb

    def consistent_key(self, limits: AttackLimits, deadline: float):
        if not self.key_a:
            return {}
        if not self._solve([-self.act], limits, deadline):
            return None
        return decode_key(self.apparent, self.model, self.key_a, self.solver.value)


def find_distinguishing_input(
    apparent: Netlist,
    s: SuspicionModel,
    observations: Sequence[tuple[Sequence[int], Sequence[int]]],
    limits: AttackLimits | None = None,
):
    """An input on which two observation-consistent keys disagree, or None."""
    limits = limits or AttackLimits()
    sess = MiterSession(apparent, s)
    for bits, outs in observations:
        sess.add_observation(bits, outs)
    found = sess.distinguishing_input(limits, time.monotonic() + limits.time_limit_s)
    return None if found is None else found[0]


def _evaluate_key(apparent: Netlist, key: dict, bits) -> tuple[int, ...]:
    n = realize_key(apparent, key)
    val = simulate_patterns(n, list(bits), 1)
    return tuple(val[o] for o in n.outputs)


def deobfuscate(
    apparent: Netlist,
    oracle: Oracle,
    s: SuspicionModel,
    limits: AttackLimits | None = None,
    check_progress: bool = True,
    verify_samples: int = 10_000,
    seed: int = 0,
    heuristic: str = "vsids",
) -> AttackResult:
    """Recover a key functionally equivalent to the oracle's hidden circuit.

    With ``check_progress`` each iteration confirms that the new observation
    refutes at least one of the two witness keys.
    """
    limits = limits or AttackLimits()
    start = time.monotonic()
    deadline = start + limits.time_limit_s
    q0 = oracle.query_count
    sess = MiterSession(apparent, s, heuristic)
    conflicts0 = sess.solver.stats["conflicts"]
    last_key: dict = {}

    def result(key, verified, reason=""):
        return AttackResult(
            key=key,
            oracle_queries=oracle.query_count - q0,
            solver_calls=sess.calls,
            conflicts=sess.solver.stats["conflicts"] - conflicts0,
            wall_time=time.monotonic() - start,
            verified=verified,
            reason=reason,
            observations=list(sess.observations),
        )

    try:
        while True:
            found = sess.distinguishing_input(limits, deadline)
            if found is None:
                break
            x, ka, kb = found
            last_key = ka
            if oracle.query_count - q0 >= limits.max_queries:
                return result(last_key, False, "query budget exhausted")
            if time.monotonic() > deadline:
                return result(last_key, False, "time limit exceeded")
            y = oracle.query(x)
            if check_progress:
                ya, yb = _evaluate_key(apparent, ka, x), _evaluate_key(apparent, kb, x)
                if ya == yb:
                    raise AttackError(f"miter returned a non-distinguishing input {x}")
                if ya == y and yb == y:
                    raise AttackError("observation refuted neither witness key")
            sess.add_observation(x, y)
        key = sess.consistent_key(limits, deadline)
    except BudgetExceeded as e:
        return result(last_key, False, str(e))
    if key is None:
        return result(last_key, False, "no key is consistent with the observations")
    attack_queries = oracle.query_count - q0
    ok = verify_key(apparent, key, oracle, samples=verify_samples, seed=seed)
    res = result(key, ok, "" if ok else "recovered key disagrees with the oracle")
    res.oracle_queries = attack_queries
    return res


def verify_key(apparent: Netlist, key: dict, o: Oracle, samples: int = 10_000, seed: int = 0) -> bool:
    """Compare the keyed circuit with the oracle on all inputs (k <= 16) or on samples.

    Uses batched oracle queries, which do count against the oracle's counter.
    """
    n = realize_key(apparent, key)
    k = len(n.inputs)
    if k <= 16:
        width = 1 << k
        cols = exhaustive_columns(k)
    else:
        width = samples
        cols = pack_vectors(random_vectors(k, samples, seed), k)
    mine = simulate_patterns(n, cols, width)
    theirs = o.query_columns(cols, width)
    return all(mine[out] == t for out, t in zip(n.outputs, theirs))


def key_differs_at(apparent: Netlist, ka: dict, kb: dict, bits) -> bool:
    return _evaluate_key(apparent, ka, bits) != _evaluate_key(apparent, kb, bits)


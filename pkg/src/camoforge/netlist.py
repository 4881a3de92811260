"""Gate-level netlist representation and the CAMO-v1 text format.

A netlist is a flat list of primary inputs, primary outputs, gates and
D flip-flops. Every net has exactly one driver; the combinational part is
acyclic. Netlists are treated as immutable values: transforms build new ones.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

FIXED_ARITY = {
    "CONST0": 0,
    "CONST1": 0,
    "NOT": 1,
    "BUF": 1,
    "AND2": 2,
    "OR2": 2,
    "NAND2": 2,
    "NOR2": 2,
    "XOR2": 2,
    "XNOR2": 2,
    "CAMO2": 2,
    "MUX2": 3,
}
# LUT1 only arises from insert_lut on a 1-input gate; parsing accepts it too.
_LUT_KIND = re.compile(r"LUT([1-6])\Z")

def gate_arity(kind: str) -> int:
    """Number of inputs for ``kind``; raises ``KeyError`` for unknown kinds."""
    if kind in FIXED_ARITY:
        return FIXED_ARITY[kind]
    m = _LUT_KIND.match(kind)
    if m:
        return int(m.group(1))
    raise KeyError(kind)


def is_lut(kind: str) -> bool:
    return _LUT_KIND.match(kind) is not None


def is_obfuscated(kind: str) -> bool:
    return kind == "CAMO2" or is_lut(kind)


def is_identifier(name: str) -> bool:
    return bool(_IDENT.match(name))


@dataclass(frozen=True)
class Gate:
    """A gate is identified by the net it drives."""

    kind: str
    output: str
    inputs: tuple[str, ...] = ()

    @property
    def id(self) -> str:
        return self.output


@dataclass(frozen=True)
class Flop:
    d: str
    q: str
    init: int = 0

    @property
    def id(self) -> str:
        return self.q


@dataclass(frozen=True)
class Netlist:
    name: str = "top"
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    gates: tuple[Gate, ...] = ()
    flops: tuple[Flop, ...] = field(default=())

    def gate(self, gate_id: str) -> Gate:
        for g in self.gates:
            if g.id == gate_id:
                return g
        raise KeyError(gate_id)

    def flop(self, flop_id: str) -> Flop:
        for f in self.flops:
            if f.id == flop_id:
                return f
        raise KeyError(flop_id)

    def drivers(self) -> dict[str, object]:
        """Map net -> driving object ("input", a Gate, or a Flop)."""
        out: dict[str, object] = {}
        for i in self.inputs:
            out.setdefault(i, "input")
        for f in self.flops:
            out.setdefault(f.q, f)
        for g in self.gates:
            out.setdefault(g.output, g)
        return out

    def nets(self) -> set[str]:
        s = set(self.inputs) | set(self.outputs)
        for g in self.gates:
            s.add(g.output)
            s.update(g.inputs)
        for f in self.flops:
            s.add(f.q)
            s.add(f.d)
        return s

    def fanout(self) -> dict[str, list[Gate]]:
        readers: dict[str, list[Gate]] = {}
        for g in self.gates:
            for i in g.inputs:
                readers.setdefault(i, []).append(g)
        return readers

    def replace(self, **changes) -> "Netlist":
        data = dict(
            name=self.name,
            inputs=self.inputs,
            outputs=self.outputs,
            gates=self.gates,
            flops=self.flops,
        )
        data.update(changes)
        data = {k: tuple(v) if k != "name" else v for k, v in data.items()}
        return Netlist(**data)


# ---------------------------------------------------------------------------
# errors


class NetlistError(ValueError):
    """Base class for netlist format and validity errors."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DuplicateDriverError(NetlistError):
    pass


class UndrivenNetError(NetlistError):
    pass


class ArityError(NetlistError):
    pass


class CombinationalCycleError(NetlistError):
    pass


# Violations are plain data; ``validate`` returns a list of them.


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str

    def __str__(self) -> str:
        return f"{self.kind}({self.subject})"


def DuplicateDriver(net: str) -> Violation:  # noqa: N802 - reads like a constructor
    return Violation("DuplicateDriver", net)


def UndrivenNet(net: str) -> Violation:  # noqa: N802
    return Violation("UndrivenNet", net)


_VIOLATION_ERRORS = {
    "DuplicateDriver": DuplicateDriverError,
    "UndrivenNet": UndrivenNetError,
    "ArityMismatch": ArityError,
    "UnknownKind": ArityError,
    "CombinationalCycle": CombinationalCycleError,
}


# ---------------------------------------------------------------------------
# validation / traversal


def _kahn(n: Netlist) -> list[int]:
    """Gate indices in topological order; gates on or behind a cycle are omitted.

    Ties go to the earliest-declared ready gate.
    """
    import heapq

    ndrv: dict[str, int] = {}
    for g in n.gates:
        ndrv[g.output] = ndrv.get(g.output, 0) + 1
    pending = [sum(ndrv.get(i, 0) for i in g.inputs) for g in n.gates]
    readers: dict[str, list[int]] = {}
    for k, g in enumerate(n.gates):
        for i in g.inputs:
            readers.setdefault(i, []).append(k)
    heap = [k for k, p in enumerate(pending) if p == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        k = heapq.heappop(heap)
        order.append(k)
        for r in readers.get(n.gates[k].output, ()):
            pending[r] -= 1
            if pending[r] == 0:
                heapq.heappush(heap, r)
    return order


def _cycle_members(n: Netlist) -> list[str]:
    done = set(_kahn(n))
    return [g.id for k, g in enumerate(n.gates) if k not in done]


def validate(n: Netlist) -> list[Violation]:
    """Return every invariant violation found in ``n`` (empty list means valid)."""
    out: list[Violation] = []
    cyclic = _cycle_members(n)
    if cyclic:
        out.append(Violation("CombinationalCycle", cyclic[0]))
    for label, names in (("inputs", n.inputs), ("outputs", n.outputs)):
        seen = set()
        for x in names:
            if x in seen:
                out.append(Violation("DuplicateDeclaration", f"{label}:{x}"))
            seen.add(x)

    driven: dict[str, int] = {}
    for x in dict.fromkeys(n.inputs):
        driven[x] = driven.get(x, 0) + 1
    for f in n.flops:
        driven[f.q] = driven.get(f.q, 0) + 1
        if f.init not in (0, 1):
            out.append(Violation("BadInit", f.id))
    for g in n.gates:
        driven[g.output] = driven.get(g.output, 0) + 1
        try:
            arity = gate_arity(g.kind)
        except KeyError:
            out.append(Violation("UnknownKind", g.id))
            continue
        if len(g.inputs) != arity:
            out.append(Violation("ArityMismatch", g.id))
    for net, count in driven.items():
        if count > 1:
            out.append(DuplicateDriver(net))

    reported = set()
    read = [i for g in n.gates for i in g.inputs] + [f.d for f in n.flops] + list(n.outputs)
    for net in read:
        if net not in driven and net not in reported:
            out.append(UndrivenNet(net))
            reported.add(net)
    return out


def check(n: Netlist) -> Netlist:
    """Raise the matching ``NetlistError`` subclass for the first violation."""
    problems = validate(n)
    if problems:
        v = problems[0]
        raise _VIOLATION_ERRORS.get(v.kind, NetlistError)(str(v))
    return n


def topological_order(n: Netlist) -> list[str]:
    """Gate ids ordered so every gate follows the gates driving its inputs.

    Primary inputs and flop outputs are sources. Among ready gates the one
    declared first wins, so the order is deterministic.
    """
    order = _kahn(n)
    if len(order) != len(n.gates):
        raise CombinationalCycleError(f"cycle through {_cycle_members(n)[0]}")
    return [n.gates[k].id for k in order]


def ordered_gates(n: Netlist) -> list[Gate]:
    by_id = {g.id: g for g in n.gates}
    return [by_id[i] for i in topological_order(n)]


def transitive_fanin(n: Netlist, nets: Iterable[str]) -> set[str]:
    """All nets that combinationally reach any of ``nets`` (inclusive)."""
    drivers = {g.output: g for g in n.gates}
    stack = list(nets)
    seen = set()
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        g = drivers.get(x)
        if g is not None:
            stack.extend(g.inputs)
    return seen


# ---------------------------------------------------------------------------
# CAMO-v1 text format


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _names(args, lineno: int) -> tuple[str, ...]:
    for tok, col in args:
        if not is_identifier(tok):
            raise NetlistSyntaxError(f"bad identifier {tok!r}", lineno, col)
    return tuple(t for t, _ in args)


def parse_netlist(text: str, name: str = "top") -> Netlist:
    """Parse CAMO-v1 text into a validated ``Netlist``.

    Raises ``NetlistSyntaxError`` for grammar problems, otherwise the
    ``NetlistError`` subclass matching the first invariant violation.
    """
    inputs = outputs = None
    gates: list[Gate] = []
    flops: list[Flop] = []
    ended = False
    lineno = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokens(raw.split("#", 1)[0])
        if not tokens:
            continue
        head, col = tokens[0]
        args = tokens[1:]
        if ended:
            raise NetlistSyntaxError("content after .end", lineno, col)

        if head in (".inputs", ".outputs"):
            if not args:
                raise NetlistSyntaxError(f"{head} needs at least one net", lineno, col)
            if gates or flops:
                raise NetlistSyntaxError(f"{head} after .gate/.flop", lineno, col)
            names = _names(args, lineno)
            if head == ".inputs":
                if inputs is not None:
                    raise NetlistSyntaxError("duplicate .inputs", lineno, col)
                inputs = names
            else:
                if outputs is not None:
                    raise NetlistSyntaxError("duplicate .outputs", lineno, col)
                outputs = names
        elif head == ".gate":
            if len(args) < 2:
                raise NetlistSyntaxError(".gate needs a kind and an output", lineno, col)
            kind, kcol = args[0]
            try:
                arity = gate_arity(kind)
            except KeyError:
                raise NetlistSyntaxError(f"unknown gate kind {kind!r}", lineno, kcol) from None
            out, *ins = _names(args[1:], lineno)
            if len(ins) != arity:
                raise ArityError(f"line {lineno}: {kind} expects {arity} inputs, got {len(ins)}")
            gates.append(Gate(kind, out, tuple(ins)))
        elif head == ".flop":
            if len(args) != 3:
                raise NetlistSyntaxError(".flop expects <q> <d> <init-bit>", lineno, col)
            q, d = _names(args[:2], lineno)
            init_tok, icol = args[2]
            if init_tok not in ("0", "1"):
                raise NetlistSyntaxError("flop init must be 0 or 1", lineno, icol)
            flops.append(Flop(d, q, int(init_tok)))
        elif head == ".end":
            if args:
                raise NetlistSyntaxError("unexpected tokens after .end", lineno, args[0][1])
            ended = True
        else:
            raise NetlistSyntaxError(f"unknown directive {head!r}", lineno, col)

    if not ended:
        raise NetlistSyntaxError("missing .end", lineno + 1)
    return check(Netlist(name, inputs or (), outputs or (), tuple(gates), tuple(flops)))


def serialize_netlist(n: Netlist) -> str:
    """Canonical CAMO-v1 text. Obfuscated kinds carry no function."""
    lines = []
    if n.inputs:
        lines.append(".inputs " + " ".join(n.inputs))
    if n.outputs:
        lines.append(".outputs " + " ".join(n.outputs))
    for g in n.gates:
        lines.append(" ".join((".gate", g.kind, g.output, *g.inputs)))
    for f in n.flops:
        lines.append(f".flop {f.q} {f.d} {f.init}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def read_netlist(path) -> Netlist:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())

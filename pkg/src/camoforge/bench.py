"""Seeded random combinational benchmarks (fanin <= 2, bounded depth)."""

from __future__ import annotations

from .netlist import Gate, Netlist, check
from .rng import SplitMix64

# weights favour the camouflageable kinds so every benchmark has plenty of sites
KIND_WEIGHTS = (
    ("NAND2", 4),
    ("NOR2", 4),
    ("XOR2", 3),
    ("AND2", 2),
    ("OR2", 2),
    ("XNOR2", 1),
    ("NOT", 1),
)


def _pick_kind(rng: SplitMix64) -> str:
    total = sum(w for _, w in KIND_WEIGHTS)
    r = rng.below(total)
    for kind, w in KIND_WEIGHTS:
        if r < w:
            return kind
        r -= w
    raise AssertionError("unreachable")


def generate_circuit(gates: int, inputs: int, outputs: int, seed: int, depth: int = 12) -> Netlist:
    """Random valid netlist with exactly ``gates`` gates, deterministic in ``seed``.

    Gate inputs are drawn half the time from nets nobody reads yet, which
    keeps dead logic rare; no gate sits deeper than ``depth`` levels. Outputs
    are the most recently created unread gates, topped up with the latest
    gates when there are too few.
    """
    if gates < 1 or inputs < 1 or outputs < 1:
        raise ValueError("gates, inputs and outputs must be >= 1")
    if outputs > gates:
        raise ValueError("cannot have more outputs than gates")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = SplitMix64(seed)
    pis = [f"i{k}" for k in range(inputs)]
    level = {p: 0 for p in pis}
    nets = list(pis)
    unread = list(pis)
    out_gates: list[Gate] = []
    for k in range(gates):
        kind = _pick_kind(rng)
        arity = 1 if kind == "NOT" else 2
        usable = [x for x in nets if level[x] < depth]
        fresh_usable = [x for x in unread if level[x] < depth]
        ins: list[str] = []
        while len(ins) < arity:
            pool = fresh_usable if fresh_usable and rng.below(2) == 0 else usable
            x = rng.choice(pool)
            if x in ins and len(usable) > 1:
                continue
            ins.append(x)
            if x in fresh_usable:
                fresh_usable.remove(x)
        name = f"g{k}"
        for x in ins:
            if x in unread:
                unread.remove(x)
        level[name] = 1 + max(level[x] for x in ins)
        nets.append(name)
        unread.append(name)
        out_gates.append(Gate(kind, name, tuple(ins)))

    sinks = [g.output for g in out_gates if g.output in unread]
    chosen = sinks[-outputs:]
    for g in reversed(out_gates):
        if len(chosen) >= outputs:
            break
        if g.output not in chosen:
            chosen.insert(0, g.output)
    chosen.sort(key=lambda s: int(s[1:]))
    return check(Netlist("top", tuple(pis), tuple(chosen), tuple(out_gates), ()))

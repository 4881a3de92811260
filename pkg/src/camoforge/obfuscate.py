"""Obfuscating transforms and the realization of (apparent netlist, secret).

The apparent netlist is what an attacker recovers by imaging the die. The
secret holds everything imaging misses: the function of each camouflaged
cell, LUT contents, intentional stuck-at nets, flops that never latch, and
hidden crosstalk couplings. ``realize`` combines the two into the circuit the
silicon actually computes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .netlist import Flop, Gate, Netlist, check, gate_arity, is_lut, is_obfuscated
from .physics import CrosstalkParams, EffectClass, SignalEnv, classify_crosstalk
from .rng import SplitMix64
from .simulate import equivalent, gate_op

CAMO_FUNCTIONS = ("NAND", "NOR", "XOR")
CAMO_KIND = {"NAND": "NAND2", "NOR": "NOR2", "XOR": "XOR2"}
CAMOUFLAGEABLE = {v: k for k, v in CAMO_KIND.items()}
NEVER_LATCHED = "never_latched"
DUMMY_KINDS = ("AND2", "OR2", "NAND2", "NOR2", "XOR2", "XNOR2", "NOT")


class ObfuscationError(ValueError):
    pass


class SecretError(ObfuscationError):
    """The secret does not match the apparent netlist."""


class CouplingBelowThreshold(ObfuscationError):
    pass


class CycleIntroduced(ObfuscationError):
    pass


@dataclass(frozen=True)
class Secret:
    camo: dict = field(default_factory=dict)
    lut: dict = field(default_factory=dict)
    stuck: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    xlinks: tuple = ()

    def updated(self, **changes) -> "Secret":
        data = {
            "camo": dict(self.camo),
            "lut": dict(self.lut),
            "stuck": dict(self.stuck),
            "timing": dict(self.timing),
            "xlinks": tuple(self.xlinks),
        }
        for k, v in changes.items():
            data[k] = tuple(v) if k == "xlinks" else dict(v)
        return Secret(**data)

    def is_empty(self) -> bool:
        return not (self.camo or self.lut or self.stuck or self.timing or self.xlinks)

    def to_dict(self) -> dict:
        return {
            "camo": dict(sorted(self.camo.items())),
            "lut": dict(sorted(self.lut.items())),
            "stuck": dict(sorted(self.stuck.items())),
            "timing": dict(sorted(self.timing.items())),
            "xlinks": [list(x) for x in self.xlinks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Secret":
        if not isinstance(data, dict):
            raise SecretError("secret must be a JSON object")
        unknown = set(data) - {"camo", "lut", "stuck", "timing", "xlinks"}
        if unknown:
            raise SecretError(f"unknown secret keys: {sorted(unknown)}")
        camo = dict(data.get("camo", {}))
        for g, f in camo.items():
            if f not in CAMO_FUNCTIONS:
                raise SecretError(f"camo {g}: unknown function {f!r}")
        lut = dict(data.get("lut", {}))
        for g, t in lut.items():
            if not isinstance(t, str) or not t or set(t) - {"0", "1"}:
                raise SecretError(f"lut {g}: table must be a 0/1 string")
        stuck = dict(data.get("stuck", {}))
        for net, v in stuck.items():
            if v not in (0, 1) or isinstance(v, bool):
                raise SecretError(f"stuck {net}: value must be 0 or 1")
        timing = dict(data.get("timing", {}))
        for fid, eff in timing.items():
            if eff != NEVER_LATCHED:
                raise SecretError(f"timing {fid}: unknown effect {eff!r}")
        xlinks = []
        for link in data.get("xlinks", []):
            if not (isinstance(link, (list, tuple)) and len(link) == 2):
                raise SecretError(f"bad xlink {link!r}")
            xlinks.append((str(link[0]), str(link[1])))
        return cls(camo, lut, stuck, timing, tuple(xlinks))

    @classmethod
    def from_json(cls, text: str) -> "Secret":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise SecretError(f"secret file is not JSON: {e}") from None
        return cls.from_dict(data)


def check_secret(apparent: Netlist, secret: Secret) -> None:
    """Raise ``SecretError`` unless ``secret`` is consistent with ``apparent``."""
    Secret.from_dict(secret.to_dict())  # value-level checks
    kinds = {g.id: g.kind for g in apparent.gates}
    for gid in secret.camo:
        if kinds.get(gid) != "CAMO2":
            raise SecretError(f"camo entry {gid} is not a CAMO2 gate")
    for gid, table in secret.lut.items():
        kind = kinds.get(gid, "")
        if not is_lut(kind):
            raise SecretError(f"lut entry {gid} is not a LUT gate")
        if len(table) != 1 << gate_arity(kind):
            raise SecretError(f"lut entry {gid}: table length {len(table)} != 2^{gate_arity(kind)}")
    for g in apparent.gates:
        if g.kind == "CAMO2" and g.id not in secret.camo:
            raise SecretError(f"missing camo function for {g.id}")
        if is_lut(g.kind) and g.id not in secret.lut:
            raise SecretError(f"missing lut table for {g.id}")
    nets = apparent.nets()
    for net in secret.stuck:
        if net not in nets:
            raise SecretError(f"stuck net {net} not in netlist")
    flop_ids = {f.id for f in apparent.flops}
    for fid in secret.timing:
        if fid not in flop_ids:
            raise SecretError(f"timing entry {fid} is not a flop")
    victims = set()
    for agg, vic in secret.xlinks:
        if agg not in nets or vic not in nets:
            raise SecretError(f"xlink ({agg}, {vic}) names an unknown net")
        if agg == vic:
            raise SecretError(f"xlink on {agg} couples a net to itself")
        if vic in victims:
            raise SecretError(f"net {vic} is the victim of two xlinks")
        victims.add(vic)


# ---------------------------------------------------------------------------
# realization


class _Namer:
    def __init__(self, taken):
        self.taken = set(taken)

    def __call__(self, base: str) -> str:
        name = base
        k = 1
        while name in self.taken:
            name = f"{base}_{k}"
            k += 1
        self.taken.add(name)
        return name


def lut_gates(gid: str, inputs, table: str, fresh) -> list[Gate]:
    """Plain gates computing ``table`` over ``inputs``, the last one driving ``gid``.

    A Shannon mux tree splitting on the first input at the root; constant or
    single-literal subtrees collapse.
    """
    gates: list[Gate] = []
    n = len(inputs)

    def build(lo: int, depth: int, out: str | None) -> str | int:
        # node covering table[lo : lo + 2**(n-depth)]; returns a net or a constant
        width = 1 << (n - depth)
        chunk = table[lo : lo + width]
        if chunk == "0" * width or chunk == "1" * width:
            if out is None:
                return int(chunk[0])
            gates.append(Gate("CONST1" if chunk[0] == "1" else "CONST0", out))
            return out
        x = inputs[depth]
        if width == 2:
            kind = "BUF" if chunk == "01" else "NOT"
            net = out or fresh(f"{gid}_l")
            gates.append(Gate(kind, net, (x,)))
            return net
        half = width // 2
        lo_val = build(lo, depth + 1, None)
        hi_val = build(lo + half, depth + 1, None)
        net = out or fresh(f"{gid}_l")
        if isinstance(lo_val, str) and isinstance(hi_val, str):
            gates.append(Gate("MUX2", net, (x, lo_val, hi_val)))
        elif not isinstance(lo_val, str) and not isinstance(hi_val, str):
            gates.append(Gate("BUF" if hi_val else "NOT", net, (x,)))
        elif isinstance(lo_val, str):
            # hi branch is constant
            gates.append(Gate("OR2" if hi_val else "AND2", net, (lo_val, x) if hi_val else (lo_val, _inv(x))))
        else:
            gates.append(Gate("AND2" if not lo_val else "OR2", net, (hi_val, x) if not lo_val else (hi_val, _inv(x))))
        return net

    inverted: dict[str, str] = {}

    def _inv(x: str) -> str:
        if x not in inverted:
            inverted[x] = fresh(f"{x}_n")
            gates.append(Gate("NOT", inverted[x], (x,)))
        return inverted[x]

    build(0, 0, gid)
    return gates


def realize(apparent: Netlist, secret: Secret) -> Netlist:
    """The plain netlist the fabricated circuit actually computes.

    CAMO2 cells get their secret function, LUTs become mux trees, never-latched
    flops become constants, crosstalk links become wired-OR gates on the
    victim, and stuck nets are driven by constants (applied last, so a stuck
    value overrides everything else on that net).
    """
    check_secret(apparent, secret)
    fresh = _Namer(apparent.nets())
    gates: list[Gate] = []
    for g in apparent.gates:
        if g.kind == "CAMO2":
            gates.append(Gate(CAMO_KIND[secret.camo[g.id]], g.output, g.inputs))
        elif is_lut(g.kind):
            gates.extend(lut_gates(g.output, g.inputs, secret.lut[g.id], fresh))
        else:
            gates.append(g)

    flops: list[Flop] = []
    for f in apparent.flops:
        if f.id in secret.timing:
            gates.append(Gate("CONST1" if f.init else "CONST0", f.q))
        else:
            flops.append(f)

    inputs = list(apparent.inputs)
    outputs = list(apparent.outputs)

    def redirect(net: str, kind: str, extra: tuple[str, ...]) -> None:
        """Make ``net``'s readers see a new gate ``kind(old net value, *extra)``."""
        nonlocal gates, flops, outputs
        if net in inputs:
            # primary inputs keep their name; readers move to the new net
            new = fresh(f"{net}_x")
            gates = [Gate(g.kind, g.output, tuple(new if i == net else i for i in g.inputs)) for g in gates]
            flops = [Flop(new if f.d == net else f.d, f.q, f.init) for f in flops]
            outputs = [new if o == net else o for o in outputs]
            gates.append(Gate(kind, new, (net, *extra) if kind == "OR2" else ()))
            return
        old = fresh(f"{net}_drv")
        gates = [Gate(g.kind, old, g.inputs) if g.output == net else g for g in gates]
        flops = [Flop(f.d, old, f.init) if f.q == net else f for f in flops]
        gates.append(Gate(kind, net, (old, *extra) if kind == "OR2" else ()))

    for agg, vic in secret.xlinks:
        redirect(vic, "OR2", (agg,))
    for net, bit in secret.stuck.items():
        redirect(net, "CONST1" if bit else "CONST0", ())

    out = Netlist(apparent.name, tuple(inputs), tuple(outputs), tuple(gates), tuple(flops))
    try:
        return check(out)
    except ValueError as e:
        raise CycleIntroduced(f"realized netlist is invalid: {e}") from None


def _post_check(before: Netlist, after: Netlist, seed: int = 0) -> None:
    res = equivalent(before, after, exhaustive_limit=16, samples=10_000, seed=seed)
    if not res:
        raise ObfuscationError(f"transform changed the function at {res.counterexample}")


# ---------------------------------------------------------------------------
# transforms


def camouflage(
    n: Netlist,
    sites=None,
    count: int | None = None,
    seed: int = 0,
    secret: Secret | None = None,
) -> tuple[Netlist, Secret]:
    """Replace NAND2/NOR2/XOR2 gates by look-alike CAMO2 cells.

    Sites are given explicitly or drawn: ``count`` gates uniformly without
    replacement (SplitMix64 ``seed``) from the eligible gates in declaration
    order.
    """
    secret = secret or Secret()
    eligible = [g.id for g in n.gates if g.kind in CAMOUFLAGEABLE]
    if sites is None:
        if count is None:
            raise ObfuscationError("give sites or count")
        if count > len(eligible):
            raise ObfuscationError(f"only {len(eligible)} camouflageable gates, asked for {count}")
        sites = SplitMix64(seed).sample(eligible, count)
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise ObfuscationError("duplicate camouflage site")
    kinds = {g.id: g.kind for g in n.gates}
    for s in sites:
        if s not in kinds:
            raise ObfuscationError(f"unknown gate {s}")
        if kinds[s] not in CAMOUFLAGEABLE:
            raise ObfuscationError(f"gate {s} ({kinds[s]}) is not camouflageable")
    chosen = set(sites)
    gates = tuple(Gate("CAMO2", g.output, g.inputs) if g.id in chosen else g for g in n.gates)
    camo = dict(secret.camo)
    camo.update({s: CAMOUFLAGEABLE[kinds[s]] for s in sites})
    apparent = n.replace(gates=gates)
    new_secret = secret.updated(camo=camo)
    _post_check(realize(n, secret), realize(apparent, new_secret), seed)
    return apparent, new_secret


def gate_table(g: Gate) -> str:
    """Truth table of a plain gate, big-endian input order."""
    k = len(g.inputs)
    bits = []
    for idx in range(1 << k):
        ins = [(idx >> (k - 1 - j)) & 1 for j in range(k)]
        bits.append(str(gate_op(g.kind, ins, 1)))
    return "".join(bits)


def insert_lut(n: Netlist, target: str, secret: Secret | None = None) -> tuple[Netlist, Secret]:
    secret = secret or Secret()
    g = n.gate(target)
    k = len(g.inputs)
    if not 1 <= k <= 6:
        raise ObfuscationError(f"gate {target} has arity {k}; LUTs take 1-6 inputs")
    if is_obfuscated(g.kind):
        raise ObfuscationError(f"gate {target} is already obfuscated")
    table = gate_table(g)
    gates = tuple(Gate(f"LUT{k}", g.output, g.inputs) if x.id == target else x for x in n.gates)
    apparent = n.replace(gates=gates)
    lut = dict(secret.lut)
    lut[target] = table
    new_secret = secret.updated(lut=lut)
    _post_check(realize(n, secret), realize(apparent, new_secret))
    return apparent, new_secret


def inject_stuck_at(apparent: Netlist, secret: Secret, net: str, value: int) -> Secret:
    """Record an invisible stuck-at fault; the apparent netlist is untouched."""
    if net not in apparent.nets():
        raise ObfuscationError(f"unknown net {net}")
    if net in secret.stuck:
        raise ObfuscationError(f"net {net} already stuck")
    if value not in (0, 1):
        raise ObfuscationError("stuck value must be 0 or 1")
    if net in secret.timing:
        raise ObfuscationError(f"net {net} is the output of a flop with a timing effect")
    stuck = dict(secret.stuck)
    stuck[net] = value
    return secret.updated(stuck=stuck)


def inject_timing_fault(apparent: Netlist, secret: Secret, flop: str) -> Secret:
    """Mark ``flop`` as never latching: its output holds the init value."""
    if flop not in {f.id for f in apparent.flops}:
        raise ObfuscationError(f"unknown flop {flop}")
    timing = dict(secret.timing)
    timing[flop] = NEVER_LATCHED
    return secret.updated(timing=timing)


def add_dummy_logic(n: Netlist, count: int, seed: int) -> Netlist:
    """Append ``count`` junk gates that read real nets but drive nothing real.

    Dummy outputs only feed other dummy gates or dangle, so every output
    function is unchanged.
    """
    if count < 0:
        raise ObfuscationError("count must be >= 0")
    if count == 0:
        return n
    rng = SplitMix64(seed)
    fresh = _Namer(n.nets())
    sources = list(n.inputs) + [f.q for f in n.flops] + [g.output for g in n.gates]
    if not sources:
        sources = [fresh("dummy_c")]
        extra = [Gate("CONST0", sources[0])]
    else:
        extra = []
    for _ in range(count - len(extra)):
        kind = rng.choice(DUMMY_KINDS)
        ins = tuple(rng.choice(sources) for _ in range(gate_arity(kind)))
        out = fresh("dummy")
        extra.append(Gate(kind, out, ins))
        sources.append(out)
    return check(n.replace(gates=n.gates + tuple(extra)))


def add_crosstalk_link(
    apparent: Netlist,
    secret: Secret,
    aggressor: str,
    victim: str,
    p: CrosstalkParams,
    dv: float,
    env: SignalEnv,
) -> Secret:
    """Add a hidden coupling: the victim reads high whenever the aggressor is high."""
    if classify_crosstalk(p, dv, env) is not EffectClass.STEALTHY_SIGNAL:
        raise CouplingBelowThreshold("coupled noise stays below the buffer threshold")
    if aggressor == victim:
        raise ObfuscationError("aggressor and victim must differ")
    nets = apparent.nets()
    for net in (aggressor, victim):
        if net not in nets:
            raise ObfuscationError(f"unknown net {net}")
    if any(v == victim for _, v in secret.xlinks):
        raise ObfuscationError(f"net {victim} already has an aggressor")
    new_secret = secret.updated(xlinks=(*secret.xlinks, (aggressor, victim)))
    realize(apparent, new_secret)  # raises CycleIntroduced
    return new_secret


def key_space(apparent: Netlist) -> dict[int, int]:
    """Candidate-set sizes as {base: exponent}: 3 per CAMO2, 2^(2^n) per LUTn."""
    out: dict[int, int] = {}
    for g in apparent.gates:
        if g.kind == "CAMO2":
            out[3] = out.get(3, 0) + 1
        elif is_lut(g.kind):
            out[2] = out.get(2, 0) + (1 << gate_arity(g.kind))
    return out


def key_space_string(apparent: Netlist) -> str:
    cells = sum(1 for g in apparent.gates if is_obfuscated(g.kind))
    parts = key_space(apparent)
    if not parts:
        return "1"
    expr = " * ".join(f"{b}^{e}" for b, e in sorted(parts.items(), reverse=True))
    if cells > 64:
        return expr
    value = 1
    for b, e in parts.items():
        value *= b**e
    return f"{expr} = {value}"


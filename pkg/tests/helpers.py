"""Independent reference oracles used by the tests.

Deliberately naive: one vector at a time, recursive, with its own gate table,
so they share no code with the bit-parallel simulator or the realizer.
"""

import itertools
import random

from camoforge.netlist import Gate, Netlist

AOI = """\
# Y = NOT(A & (B | C))
.inputs a b c
.outputs y
.gate OR2 n1 b c
.gate AND2 n2 a n1
.gate NOT y n2
.end
"""

TABLE = {
    "AND2": lambda a, b: a & b,
    "OR2": lambda a, b: a | b,
    "NAND2": lambda a, b: 1 - (a & b),
    "NOR2": lambda a, b: 1 - (a | b),
    "XOR2": lambda a, b: a ^ b,
    "XNOR2": lambda a, b: 1 - (a ^ b),
    "NOT": lambda a: 1 - a,
    "BUF": lambda a: a,
    "MUX2": lambda s, a, b: b if s else a,
    "CONST0": lambda: 0,
    "CONST1": lambda: 1,
}
CAMO = {"NAND": "NAND2", "NOR": "NOR2", "XOR": "XOR2"}


def naive_eval(n: Netlist, bits, forced=None, camo=None, lut=None, wired_or=None):
    """Outputs of ``n`` for one vector.

    ``forced`` maps net -> constant (a stuck-at / cofactor), ``camo`` and
    ``lut`` give hidden functions, ``wired_or`` maps victim -> aggressor.
    """
    forced = forced or {}
    camo = camo or {}
    lut = lut or {}
    wired_or = wired_or or {}
    drivers = {g.output: g for g in n.gates}
    flops = {f.q: f for f in n.flops}
    env = dict(zip(n.inputs, bits))
    memo = {}

    def raw(net):
        if net in env:
            return env[net]
        if net in flops:
            return flops[net].init
        g = drivers[net]
        ins = [value(i) for i in g.inputs]
        if g.kind == "CAMO2":
            return TABLE[CAMO[camo[g.output]]](*ins)
        if g.kind.startswith("LUT"):
            idx = int("".join(map(str, ins)), 2)
            return int(lut[g.output][idx])
        return TABLE[g.kind](*ins)

    def value(net):
        if net in forced:
            return forced[net]
        if net not in memo:
            v = raw(net)
            if net in wired_or:
                v |= value(wired_or[net])
            memo[net] = v
        return memo[net]

    return tuple(value(o) for o in n.outputs)


def naive_table(n: Netlist, **kw):
    k = len(n.inputs)
    return [naive_eval(n, bits, **kw) for bits in itertools.product((0, 1), repeat=k)]


def random_netlist(rng: random.Random, n_inputs=None, n_gates=None, kinds=None, n_outputs=None):
    """Small random valid combinational netlist (used by property tests)."""
    n_inputs = n_inputs or rng.randint(1, 6)
    n_gates = n_gates or rng.randint(1, 15)
    kinds = kinds or ["AND2", "OR2", "NAND2", "NOR2", "XOR2", "XNOR2", "NOT", "BUF", "MUX2"]
    nets = [f"x{i}" for i in range(n_inputs)]
    gates = []
    for k in range(n_gates):
        kind = rng.choice(kinds)
        arity = len(TABLE[kind].__code__.co_varnames)
        ins = tuple(rng.choice(nets) for _ in range(arity))
        name = f"w{k}"
        gates.append(Gate(kind, name, ins))
        nets.append(name)
    gate_nets = [g.output for g in gates]
    n_outputs = n_outputs or rng.randint(1, min(3, len(gate_nets)))
    outs = tuple(rng.sample(gate_nets, n_outputs))
    return Netlist("top", tuple(nets[:n_inputs]), outs, tuple(gates), ())


def brute_force_sat(clauses, num_vars):
    """Enumerate all 2^n assignments at once: bit j of a column = value in assignment j."""
    width = 1 << num_vars
    full = (1 << width) - 1
    cols = [0]
    for v in range(num_vars):
        # runs of 2^v zeros then 2^v ones, tiled by doubling
        col = ((1 << (1 << v)) - 1) << (1 << v)
        span = 1 << (v + 1)
        while span < width:
            col |= col << span
            span <<= 1
        cols.append(col & full)
    alive = full
    for c in clauses:
        sat = 0
        for l in c:
            sat |= cols[l] if l > 0 else full ^ cols[-l]
        alive &= sat
        if not alive:
            return False
    return bool(alive)


def random_cnf(rng: random.Random, max_vars=20, max_clauses=90, k=3):
    n = rng.randint(1, max_vars)
    m = rng.randint(1, max_clauses)
    clauses = []
    for _ in range(m):
        width = rng.randint(1, k)
        clauses.append(tuple(rng.choice((-1, 1)) * rng.randint(1, n) for _ in range(width)))
    return n, clauses


def cofactor_table(n: Netlist, net: str, value: int):
    """Truth table of ``n`` with ``net`` cut out and tied to ``value``.

    The net becomes an extra primary input (its driver, if any, keeps driving
    a renamed dangling net); the rows of that widened table where the extra
    input equals ``value`` are the Shannon cofactor.
    """
    from camoforge.simulate import truth_table

    if net in n.inputs:
        idx = n.inputs.index(net)
        rows = truth_table(n)
        k = len(n.inputs)
        bit = 1 << (k - 1 - idx)
        return [rows[(i | bit) if value else (i & ~bit)] for i in range(1 << k)]
    cut = net + "__cut"
    gates = tuple(Gate(g.kind, cut if g.output == net else g.output, g.inputs) for g in n.gates)
    widened = n.replace(inputs=n.inputs + (net,), gates=gates)
    rows = truth_table(widened)
    return [rows[2 * i + value] for i in range(1 << len(n.inputs))]

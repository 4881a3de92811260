import random

import pytest
from hypothesis import given, settings, strategies as st

from camoforge.netlist import (
    ArityError,
    CombinationalCycleError,
    DuplicateDriver,
    DuplicateDriverError,
    Gate,
    Netlist,
    NetlistError,
    NetlistSyntaxError,
    UndrivenNet,
    UndrivenNetError,
    parse_netlist,
    serialize_netlist,
    topological_order,
    validate,
)

from helpers import AOI, naive_table, random_netlist


def test_parse_minimal_inverter():
    n = parse_netlist(".inputs a\n.outputs y\n.gate NOT y a\n.end")
    assert n.inputs == ("a",)
    assert n.outputs == ("y",)
    assert n.gates == (Gate("NOT", "y", ("a",)),)


def test_parse_aoi_keeps_declaration_order():
    n = parse_netlist(AOI)
    assert [g.kind for g in n.gates] == ["OR2", "AND2", "NOT"]
    assert naive_table(n) == [(1,), (1,), (1,), (1,), (1,), (0,), (0,), (0,)]


def test_self_loop_is_a_cycle_error():
    with pytest.raises(CombinationalCycleError):
        parse_netlist(".inputs a\n.gate NOT a a\n.end")


@pytest.mark.parametrize(
    "text, error",
    [
        (".inputs a\n.outputs y\n.gate NOT y a\n", NetlistSyntaxError),
        (".inputs a\n.outputs y\n.gate FOO y a\n.end", NetlistSyntaxError),
        (".inputs a\n.outputs y\n.gate NOT y a b\n.end", ArityError),
        (".inputs a b\n.outputs y\n.gate AND2 y a b\n.gate OR2 y a b\n.end", DuplicateDriverError),
        (".inputs a\n.outputs y\n.gate AND2 y a z\n.end", UndrivenNetError),
        (".inputs a\n.outputs y\n.gate AND2 y a p\n.gate AND2 p a y\n.end", CombinationalCycleError),
        (".inputs 1a\n.outputs y\n.end", NetlistSyntaxError),
        (".inputs a\n.outputs y\n.gate NOT y a\n.inputs b\n.end", NetlistSyntaxError),
        (".inputs a\n.outputs y\n.flop y a 2\n.end", NetlistSyntaxError),
    ],
)
def test_error_kinds(text, error):
    with pytest.raises(error):
        parse_netlist(text)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(NetlistSyntaxError) as info:
        parse_netlist(".inputs a\n.outputs y\n.gate NOT y a\n  .bogus x\n.end")
    assert info.value.line == 4
    assert info.value.column == 3


def test_comments_and_flops():
    n = parse_netlist(".inputs a  # the input\n.outputs y\n.flop q a 1\n.gate BUF y q\n.end\n")
    assert n.flops[0].q == "q" and n.flops[0].d == "a" and n.flops[0].init == 1
    assert parse_netlist(serialize_netlist(n)) == n


def test_serialize_inverter():
    text = serialize_netlist(parse_netlist(".inputs a\n.outputs y\n.gate NOT y a\n.end"))
    assert text == ".inputs a\n.outputs y\n.gate NOT y a\n.end\n"
    assert text.count(".gate NOT") == 1


def test_serialize_aoi_round_trip():
    n = parse_netlist(AOI)
    text = serialize_netlist(n)
    lines = text.splitlines()
    assert sum(l.startswith(".gate") for l in lines) == 3
    assert lines[-1] == ".end"
    assert parse_netlist(text) == n


def test_serialize_camo_has_no_function():
    n = parse_netlist(".inputs a b\n.outputs y\n.gate CAMO2 y a b\n.end")
    text = serialize_netlist(n)
    assert ".gate CAMO2 y a b\n" in text
    for f in ("NAND", "NOR", "XOR"):
        assert f not in text


def test_validate_examples():
    mux = Netlist("m", ("s", "a", "b"), ("y",), (Gate("MUX2", "y", ("s", "a", "b")),))
    assert validate(mux) == []
    dup = Netlist("d", ("a", "b"), ("y",), (Gate("AND2", "y", ("a", "b")), Gate("OR2", "y", ("a", "b"))))
    assert validate(dup) == [DuplicateDriver("y")]
    undriven = Netlist("u", ("a",), ("y",), (Gate("AND2", "y", ("a", "z")),))
    assert validate(undriven) == [UndrivenNet("z")]


def test_validate_other_invariants():
    assert validate(Netlist("x", ("a", "a"), ("a",))) != []
    assert validate(Netlist("x", ("a",), ("y",))) == [UndrivenNet("y")]
    assert validate(Netlist("x", ("a",), ("y",), (Gate("AND2", "y", ("a",)),)))[0].kind == "ArityMismatch"


def test_topological_order_examples():
    assert topological_order(parse_netlist(AOI)) == ["n1", "n2", "y"]
    single = parse_netlist(".inputs a\n.outputs y\n.gate NOT y a\n.end")
    assert topological_order(single) == ["y"]
    two = parse_netlist(".inputs a\n.outputs g1 g2\n.gate NOT g1 a\n.gate BUF g2 a\n.end")
    assert topological_order(two) == ["g1", "g2"]


def test_topological_order_out_of_declaration_order():
    n = parse_netlist(".inputs a\n.outputs y\n.gate NOT y m\n.gate BUF m a\n.end")
    assert topological_order(n) == ["m", "y"]


def test_flop_outputs_are_sources():
    n = parse_netlist(".inputs a\n.outputs y\n.gate AND2 y a q\n.gate NOT d y\n.flop q d 0\n.end")
    assert topological_order(n) == ["y", "d"]


def _shuffled(rng, n):
    gates = list(n.gates)
    rng.shuffle(gates)
    return n.replace(gates=gates)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_round_trip_and_topo_properties(seed):
    rng = random.Random(seed)
    n = _shuffled(rng, random_netlist(rng))
    assert validate(n) == []
    assert parse_netlist(serialize_netlist(n)) == n
    order = topological_order(n)
    assert sorted(order) == sorted(g.id for g in n.gates)
    pos = {gid: k for k, gid in enumerate(order)}
    driven_by_gate = {g.output for g in n.gates}
    for g in n.gates:
        for i in g.inputs:
            if i in driven_by_gate:
                assert pos[i] < pos[g.id]


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=".abcdeginopstuy NOT AND2 CAMO2 LUT3 0 1 # \n", max_size=120))
def test_parser_fuzz_never_crashes(text):
    try:
        parse_netlist(text)
    except NetlistError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_corrupted_netlists_are_rejected(seed):
    rng = random.Random(seed)
    n = random_netlist(rng)
    text = serialize_netlist(n).splitlines()
    gate_lines = [k for k, l in enumerate(text) if l.startswith(".gate")]
    k = rng.choice(gate_lines)
    parts = text[k].split()
    mutation = rng.randrange(3)
    if mutation == 0:
        parts[-1] = "zz_undriven"
    elif mutation == 1:
        parts.append("x0")
    else:
        parts[2] = n.inputs[0]
    text[k] = " ".join(parts)
    with pytest.raises(NetlistError):
        parse_netlist("\n".join(text))

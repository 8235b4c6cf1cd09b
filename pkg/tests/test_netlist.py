import math

import pytest
from hypothesis import given, settings, strategies as st

from uwblna.circuit import Circuit, Component, Port, expand_devices
from uwblna.errors import NetlistSemanticError, NetlistSyntaxError
from uwblna.netlist import format_netlist, parse_netlist
from uwblna.topologies import TOPOLOGIES, build_topology
from uwblna.units import parse_value


@pytest.mark.parametrize("text,expected", [
    ("50", 50.0), ("0.28n", 0.28e-9), ("1.5k", 1500.0), ("2meg", 2e6), ("10f", 10e-15),
    ("3u", 3e-6), ("4m", 4e-3), ("1g", 1e9), ("1t", 1e12), ("2.2pF", 2.2e-12),
    ("1e-9", 1e-9), ("-3", -3.0),
])
def test_parse_value_suffixes(text, expected):
    assert parse_value(text) == expected


def test_parse_value_exact_decimal():
    # decimal scaling, not float multiplication
    assert parse_value("0.28n") == 2.8e-10


def test_parse_value_rejects_garbage():
    with pytest.raises(ValueError):
        parse_value("abc")


def test_single_resistor():
    c = parse_netlist("R1 1 0 50\n")
    assert len(c.components) == 1
    r = c["R1"]
    assert r.kind == "R" and r.nodes == (1, 0) and r.value == 50.0


def test_inductor_suffix():
    c = parse_netlist("L1 2 0 0.28n\nR1 2 0 50\n")
    assert c["L1"].value == pytest.approx(0.28e-9, rel=1e-15)


def test_dangling_node_is_semantic_error():
    with pytest.raises(NetlistSemanticError, match="dangling node"):
        parse_netlist("R1 1 99 50\n")


def test_nonpositive_value():
    with pytest.raises(NetlistSemanticError) as err:
        parse_netlist("R1 1 0 50\nC1 1 0 -1p\n")
    assert err.value.line == 2


def test_duplicate_label_reports_line():
    with pytest.raises(NetlistSemanticError) as err:
        parse_netlist("R1 1 0 50\nR1 1 0 20\n")
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_syntax_error_has_column():
    with pytest.raises(NetlistSyntaxError) as err:
        parse_netlist("R1 1 0 50\nR2 1 x 50\n")
    assert err.value.line == 2 and err.value.column == 6


def test_unknown_element_and_directive():
    with pytest.raises(NetlistSyntaxError):
        parse_netlist("X1 1 0 50\n")
    with pytest.raises(NetlistSyntaxError):
        parse_netlist(".option foo\nR1 1 0 1\n")


def test_comments_crlf_and_end():
    text = "# header\r\nR1 1 0 50 # load\r\n.end\r\nthis is ignored\r\n"
    c = parse_netlist(text)
    assert [x.label for x in c.components] == ["R1"]


def test_model_ports_and_tf():
    text = """
.title stage
Q1 1 3 2 model=hbt
L1 2 0 0.28n
R3 3 0 50
.model hbt rb=5 ic=1m beta=150 cpi=150f cbc=0
.port 1 0 z0=50
.tf v(3) port1
"""
    c = parse_netlist(text)
    assert c.title == "stage"
    q = c["Q1"].device
    assert q.r_b == 5 and q.beta == 150 and q.C_pi == pytest.approx(150e-15)
    assert q.g_m == pytest.approx(1e-3 * 1.602176634e-19 / (1.380649e-23 * 300), rel=1e-12)
    assert c.ports == (Port(1, 0, 50.0),)
    assert c.probe.output == ("v", 3, 0) and c.probe.source == "port1"


def test_undefined_model():
    with pytest.raises(NetlistSemanticError, match="undefined model"):
        parse_netlist("Q1 1 2 0 model=nope\nR1 1 0 1\nR2 2 0 1\n")


def test_vccs_line():
    c = parse_netlist("R1 1 0 50\nR2 2 0 50\nG1 2 0 1 0 40m\n")
    g = c["G1"]
    assert g.nodes == (2, 0, 1, 0) and g.value == pytest.approx(0.04)


@pytest.mark.parametrize("which", TOPOLOGIES)
def test_round_trip_topologies(which):
    c = build_topology(which)
    once = format_netlist(c)
    assert format_netlist(parse_netlist(once)) == once
    assert parse_netlist(once) == c


@pytest.mark.parametrize("which", TOPOLOGIES)
def test_round_trip_expanded(which):
    e = expand_devices(build_topology(which))
    text = format_netlist(e)
    assert parse_netlist(text) == e


@settings(max_examples=60, deadline=None)
@given(values=st.lists(st.floats(min_value=1e-15, max_value=1e6, allow_nan=False),
                       min_size=1, max_size=6))
def test_round_trip_random_ladders(values):
    comps = []
    for i, v in enumerate(values):
        kind = "RLC"[i % 3]
        comps.append(Component(kind, f"{kind}{i}", (i + 1, i), v))
    comps.append(Component("R", "RT", (len(values), 0), 50.0))
    c = Circuit(tuple(comps), (Port(1, 0, 50.0),), "ladder")
    text = format_netlist(c)
    assert parse_netlist(text) == c
    assert format_netlist(parse_netlist(text)) == text


def test_noise_flags_round_trip():
    c = parse_netlist("R1 1 0 50 noiseless\nR2 1 0 1k shot=1m\n")
    assert not c["R1"].noisy
    assert c["R2"].shot_current == pytest.approx(1e-3)
    assert parse_netlist(format_netlist(c)) == c


def test_infinite_beta_model_round_trip():
    c = parse_netlist("Q1 1 2 0 model=m\nR1 1 0 50\nR2 2 0 50\n"
                      ".model m rb=0 gm=40m beta=inf cpi=1p cbc=0\n")
    assert math.isinf(c["Q1"].device.beta)
    assert parse_netlist(format_netlist(c)) == c

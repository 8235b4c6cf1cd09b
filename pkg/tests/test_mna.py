import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwblna.circuit import Circuit, Component, Port, expand_devices
from uwblna.errors import DomainError, PortError, SingularMatrixError, StructureError
from uwblna.mna import (FrequencyGrid, TwoPortSweep, assemble, gain_flatness, group_delay,
                        group_delay_of, input_impedance, solve_ac, solve_sweep, stability,
                        two_port_sparams)
from uwblna.topologies import build_topology


def R(label, a, b, v):
    return Component("R", label, (a, b), v)


def L(label, a, b, v):
    return Component("L", label, (a, b), v)


def C(label, a, b, v):
    return Component("C", label, (a, b), v)


def test_assemble_single_resistor():
    p = assemble(Circuit((R("R1", 1, 0, 50.0),)))
    assert p.G.shape == (1, 1) and p.G[0, 0] == pytest.approx(1 / 50)
    assert not p.C.any()


def test_assemble_single_inductor():
    p = assemble(Circuit((L("L1", 1, 0, 1e-9),)))
    assert p.size == 2
    assert p.C[1, 1] == -1e-9


def test_fig3_dimension_counts_expansion():
    c = build_topology("input_stage_fig3")
    e = expand_devices(c)
    p = assemble(c)
    n_nodes = len([n for n in e.nodes if n != 0])
    n_branches = sum(1 for x in e.components if x.kind in "LV")
    assert p.size == n_nodes + n_branches == len(p.labels)
    assert sum(1 for lab in p.labels if lab.startswith("i(")) == n_branches


def test_divider():
    c = Circuit((Component("V", "V1", (1, 0), 1.0), R("R1", 1, 2, 50.0), R("R2", 2, 0, 50.0)))
    p = assemble(c)
    x = solve_ac(p, 1e6)
    assert p.voltage(x, 2, 0) == pytest.approx(0.5 + 0j, abs=1e-15)


def test_inductor_voltage_is_j():
    c = Circuit((Component("I", "I1", (0, 1), 1.0), L("L1", 1, 0, 1 / (2 * math.pi))))
    p = assemble(c)
    assert p.voltage(solve_ac(p, 1.0), 1, 0) == pytest.approx(1j, abs=1e-14)


def test_rc_3db():
    Rv, Cv = 1e3, 1e-9
    c = Circuit((Component("V", "V1", (1, 0), 1.0), R("R1", 1, 2, Rv), C("C1", 2, 0, Cv)))
    p = assemble(c)
    v = p.voltage(solve_ac(p, 1 / (2 * math.pi * Rv * Cv)), 2, 0)
    assert abs(v) == pytest.approx(1 / math.sqrt(2), rel=1e-12)


def test_voltage_source_loop():
    c = Circuit((Component("V", "V1", (1, 0), 1.0), Component("V", "V2", (1, 0), 2.0),
                 R("R1", 1, 0, 1.0)))
    with pytest.raises(StructureError):
        assemble(c)


def test_singular_at_resonance():
    Lv, Cv = 1e-9, 1e-12
    c = Circuit((Component("I", "I1", (0, 1), 1.0), L("L1", 1, 0, Lv), C("C1", 1, 0, Cv)))
    f0 = 1 / (2 * math.pi * math.sqrt(Lv * Cv))
    with pytest.raises(SingularMatrixError):
        solve_ac(assemble(c), f0)


GRID = FrequencyGrid.log(1e8, 20e9, 41)


def test_through_connection():
    c = Circuit((), (Port(1, 0), Port(1, 0)), "through")
    sw = two_port_sparams(c, GRID)
    assert np.allclose(sw["s21"], 1, atol=1e-12)
    assert np.allclose(sw["s11"], 0, atol=1e-12)


def test_series_resistor():
    c = Circuit((R("R1", 1, 2, 50.0),), (Port(1, 0), Port(2, 0)))
    sw = two_port_sparams(c, GRID)
    assert np.allclose(sw["s11"], 1 / 3, atol=1e-12)
    assert np.allclose(sw["s21"], 2 / 3, atol=1e-12)


def test_port_count_checked():
    c = Circuit((R("R1", 1, 0, 50.0),), (Port(1, 0),))
    with pytest.raises(PortError):
        two_port_sparams(c, GRID)


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6))
def test_passive_reciprocity_and_passivity(vals):
    # pi network: shunt C, series L + R, shunt R || C
    r1 = 10 ** (1 + 2 * vals[0])
    l1 = 10 ** (-10 + 2 * vals[1])
    c1 = 10 ** (-13 + 2 * vals[2])
    c2 = 10 ** (-13 + 2 * vals[3])
    r2 = 10 ** (1 + 3 * vals[4])
    c = Circuit((C("C1", 1, 0, c1), L("L1", 1, 3, l1), R("R1", 3, 2, r1), R("R2", 2, 0, r2),
                 C("C2", 2, 0, c2)), (Port(1, 0), Port(2, 0)))
    sw = two_port_sparams(c, GRID)
    assert np.allclose(sw["s12"], sw["s21"], atol=1e-9)
    for col in (("s11", "s21"), ("s12", "s22")):
        power = np.abs(sw[col[0]]) ** 2 + np.abs(sw[col[1]]) ** 2
        assert np.all(power <= 1 + 1e-9)


def test_lossless_network_conserves_power():
    c = Circuit((L("L1", 1, 2, 2e-9), C("C1", 2, 0, 1e-12)), (Port(1, 0), Port(2, 0)))
    sw = two_port_sparams(c, GRID)
    assert np.allclose(np.abs(sw["s11"]) ** 2 + np.abs(sw["s21"]) ** 2, 1, atol=1e-9)


def test_input_impedance_resistor():
    c = Circuit((R("R1", 1, 0, 50.0),), (Port(1, 0),))
    assert input_impedance(c, 1, 3e9) == pytest.approx(50 + 0j, abs=1e-12)


def test_input_impedance_inductor():
    c = Circuit((L("L1", 1, 0, 0.28e-9),), (Port(1, 0),))
    z = input_impedance(c, 1, 6.5e9)
    assert z.real == pytest.approx(0, abs=1e-12)
    assert z.imag == pytest.approx(2 * math.pi * 6.5e9 * 0.28e-9, rel=1e-12)
    assert z.imag == pytest.approx(11.44, abs=0.01)


def test_input_impedance_bad_port():
    c = Circuit((R("R1", 1, 0, 50.0),), (Port(1, 0),))
    with pytest.raises(PortError):
        input_impedance(c, 2, 1e9)


def _sweep(s11=0, s12=0, s21=0, s22=0, n=3):
    s = np.zeros((n, 2, 2), dtype=complex)
    s[:, 0, 0], s[:, 0, 1], s[:, 1, 0], s[:, 1, 1] = s11, s12, s21, s22
    return TwoPortSweep(np.linspace(1e9, 2e9, n), s, (50.0, 50.0))


def test_k_unilateral_is_inf():
    st_ = stability(_sweep(s11=0.2, s22=0.3))
    assert np.all(np.isinf(st_.k))


def test_k_hand_example():
    st_ = stability(_sweep(s12=0.5, s21=0.5))
    assert np.allclose(st_.k, 2.125, rtol=0, atol=1e-12)
    assert np.allclose(st_.delta_mag, 0.25)


def test_k_matched_through():
    st_ = stability(_sweep(s21=1.0))
    assert np.all(np.isinf(st_.k))  # S12 = 0: unilateral
    st_ = stability(_sweep(s21=1.0, s12=1.0))
    assert np.allclose(st_.k, 1.0) and np.allclose(st_.delta_mag, 1.0)


def test_group_delay_flat_is_zero():
    f = np.linspace(1e9, 2e9, 11)
    assert np.allclose(group_delay_of(f, np.full(11, 0.7 + 0j)), 0)


def test_group_delay_needs_three_points():
    with pytest.raises(DomainError):
        group_delay_of([1e9, 2e9], np.ones(2))


def _single_pole_error(n, p=2 * math.pi * 1e9):
    f = np.linspace(1e6, 2e9, n)
    w = 2 * math.pi * f
    h = 1 / (1 + 1j * w / p)
    exact = (1 / p) / (1 + (w / p) ** 2)
    return np.max(np.abs(group_delay_of(f, h) - exact)), group_delay_of(f, h)[0], 1 / p


def test_single_pole_low_frequency_limit():
    _, tau0, expected = _single_pole_error(2001)
    assert tau0 == pytest.approx(expected, rel=1e-4)


def test_group_delay_second_order():
    e1, _, _ = _single_pole_error(201)
    e2, _, _ = _single_pole_error(401)
    assert 3.5 < e1 / e2 < 4.5


def test_cascade_group_delay_adds():
    # two RC sections isolated by a unity VCCS buffer
    r, c1, c2 = 100.0, 1e-12, 2e-12
    parts = (Component("V", "V1", (1, 0), 1.0), R("R1", 1, 2, r), C("C1", 2, 0, c1),
             Component("G", "G1", (0, 3, 2, 0), 1.0), R("RB", 3, 0, 1.0),
             R("R2", 3, 4, r), C("C2", 4, 0, c2))
    p = assemble(Circuit(parts))
    f = np.linspace(1e8, 5e9, 801)
    h1 = np.array([p.voltage(solve_ac(p, x), 2, 0) for x in f])
    h = np.array([p.voltage(solve_ac(p, x), 4, 0) for x in f])
    h2 = h / h1
    total = group_delay_of(f, h)
    assert np.allclose(total, group_delay_of(f, h1) + group_delay_of(f, h2), rtol=1e-6, atol=1e-16)


def _sweep_from_db(db):
    n = len(db)
    s21 = 10 ** (np.asarray(db) / 20)
    s = np.zeros((n, 2, 2), dtype=complex)
    s[:, 1, 0] = s21
    return TwoPortSweep(np.linspace(3.1e9, 10.6e9, n), s, (50.0, 50.0))


def test_flatness_examples():
    assert gain_flatness(_sweep_from_db(np.full(9, 12.0))) == 0
    assert gain_flatness(_sweep_from_db([18.9, 19.5, 20.2, 19.0])) == pytest.approx(0.65)
    assert gain_flatness(_sweep_from_db(np.linspace(10, 11, 7))) == pytest.approx(0.5)


def test_flatness_band_outside_sweep():
    with pytest.raises(DomainError):
        gain_flatness(_sweep_from_db([1, 2, 3]), (1e9, 5e9))


def test_solve_residual_on_full_lna():
    c = build_topology("full_lna_fig8")
    p = assemble(c, terminate="all")
    b = p.injection(1, 0, 1.0)
    for f in (3.1e9, 6.5e9, 10.6e9):
        x = solve_ac(p, f, b)
        r = p.matrix(2j * math.pi * f) @ x - b
        assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b)


def test_sweep_matches_pointwise():
    c = build_topology("full_lna_fig8")
    grid = FrequencyGrid.log(3e9, 11e9, 9)
    sw = two_port_sparams(c, grid)
    for k, f in enumerate(grid.points):
        single = two_port_sparams(c, FrequencyGrid([f]))
        assert np.allclose(single.s[0], sw.s[k], rtol=0, atol=1e-14)
    assert np.allclose(group_delay(sw), group_delay_of(grid.points, sw["s21"]))


def test_batched_solve_matches_solve_ac():
    p = assemble(build_topology("full_lna_fig8"), terminate="all")
    b = p.injection(1, 0, 1.0)
    fs = np.linspace(3e9, 11e9, 7)
    xs = solve_sweep(p, fs, b)
    for k, f in enumerate(fs):
        x = solve_ac(p, f, b)
        assert np.linalg.norm(xs[k] - x) <= 1e-12 * np.linalg.norm(x)


def test_batched_solve_singular_point():
    Lv, Cv = 1e-9, 1e-12
    c = Circuit((Component("I", "I1", (0, 1), 1.0), L("L1", 1, 0, Lv), C("C1", 1, 0, Cv)))
    f0 = 1 / (2 * math.pi * math.sqrt(Lv * Cv))
    with pytest.raises(SingularMatrixError):
        solve_sweep(assemble(c), [1e9, f0, 9e9])

"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION n: PASS|FAIL`` line (visible in the
pytest log) and then asserts. Tolerances are pinned as module constants.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from uwblna.analytic import (PowerBudget, input_stage_tf, output_stage_zeros_pole,
                             power_comparison, zin_analytic)
from uwblna.design import (apply_variables, flatness_score, solve_cancellation,
                           solve_input_match)
from uwblna.mna import (FrequencyGrid, TwoPortSweep, assemble, gain_flatness, group_delay_of,
                        input_impedance, stability, two_port_sparams)
from uwblna.circuit import Circuit, Component, HybridPiParams, Port
from uwblna.noise import friis_cascade, nf_from_params, noise_correlation_nf, noise_parameters
from uwblna.polezero import factor, poles_of, transfer_function
from uwblna.topologies import (build_topology, input_stage_circuit, input_stage_params,
                               load_design, output_stage_circuit, output_stage_params,
                               with_output_stage)

from conftest import SUITE_SEEDS, UWB, design_suite_case, random_input_stage, random_output_stage

N_RANDOM = 100
ZIN_TOL = 1e-9
ZIN_RUNTIME_S = 5.0
P1_TOL = 1e-9
PENCIL_TOL = 1e-6
Z2_TOL = 1e-6
TRANSCRIPTION_TOL = 0.05
TRANSCRIPTION_SHARE = 0.90
ORACLE_NF_TOL = 0.02
FRIIS_G1 = 1e9
FRIIS_TOL = 1e-8
K_TOL = 1e-12
CONVERGED_RESIDUAL = 1e-3
CONVERGED_SHARE = 0.95
RETURN_LOSS_DB = -10.0
FLATNESS_DB = 1.0


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok
    return say


def _rel_nearest(roots, target):
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return math.inf
    return float(np.min(np.abs(roots - target)) / abs(target))


def test_criterion_1_input_impedance_oracle(verdict):
    rng = np.random.default_rng(101)
    f = np.linspace(*UWB, 401)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(N_RANDOM):
        p = random_input_stage(rng)
        z_num = input_impedance(input_stage_circuit(p), 1, f)
        z_ref = zin_analytic(p, 2 * np.pi * f)
        worst = max(worst, float(np.max(np.abs(z_ref - z_num) / np.abs(z_ref))))
    elapsed = time.perf_counter() - t0
    ok = worst <= ZIN_TOL and elapsed < ZIN_RUNTIME_S
    verdict(1, ok, f"max rel err {worst:.2e} (<= {ZIN_TOL:g}), {elapsed:.2f} s (< {ZIN_RUNTIME_S:g} s)")
    assert ok


def test_criterion_2_input_stage_poles(verdict):
    rng = np.random.default_rng(102)
    worst_tf, worst_pencil, p0_present = 0.0, 0.0, 0
    for _ in range(N_RANDOM):
        p = random_input_stage(rng)
        p1 = -1 / (p.g_m * p.L)
        tf_poles = factor(input_stage_tf(p)).poles
        worst_tf = max(worst_tf, _rel_nearest(tf_poles, p1))
        pencil = poles_of(assemble(input_stage_circuit(p), terminate="all"))
        p0_present += int(np.any(pencil == 0))
        for r in tf_poles:
            worst_pencil = max(worst_pencil, _rel_nearest(pencil, r))
    ok = worst_tf <= P1_TOL and worst_pencil <= PENCIL_TOL
    verdict(2, ok, f"P1 in closed-form poles: worst {worst_tf:.2e} (<= {P1_TOL:g}); "
            f"closed-form poles in pencil poles: worst {worst_pencil:.2e} (<= {PENCIL_TOL:g}); "
            f"origin pole present in {p0_present}/{N_RANDOM} pencils")
    assert ok


def test_criterion_3_output_stage_zeros(verdict):
    rng = np.random.default_rng(103)
    worst_z2, within = 0.0, 0
    for _ in range(N_RANDOM):
        p = random_output_stage(rng)
        pz = factor(transfer_function(output_stage_circuit(p)))
        pub = output_stage_zeros_pole(p)
        worst_z2 = max(worst_z2, _rel_nearest(pz.zeros, pub.zeros[2]))
        z1_ok = _rel_nearest(pz.zeros, pub.zeros[1]) <= TRANSCRIPTION_TOL
        p2_ok = _rel_nearest(pz.poles, pub.poles[0]) <= TRANSCRIPTION_TOL
        within += int(z1_ok and p2_ok)
    share = within / N_RANDOM
    ok = worst_z2 <= Z2_TOL and share >= TRANSCRIPTION_SHARE
    verdict(3, ok, f"-R_f/L_f in numeric zeros: worst {worst_z2:.2e} (<= {Z2_TOL:g}); "
            f"Z1 and P2 within {TRANSCRIPTION_TOL:.0%}: {within}/{N_RANDOM} "
            f"(need {TRANSCRIPTION_SHARE:.0%}); the rest are transcription-suspect")
    assert ok


def _ce_stage(dev):
    q = Component("Q", "Q1", (1, 2, 0), device=dev)
    return Circuit((q,), (Port(1, 0, 50.0), Port(2, 0, 50.0)), "single CE stage")


def test_criterion_4_noise_floor_and_oracle(verdict):
    dev = HybridPiParams.from_bias(1e-3, r_b=5.0, beta=150.0, f_T=40e9)
    w = 2 * math.pi * 6.5e9
    p = noise_parameters(dev, 0.28e-9, w)
    floor = nf_from_params(p, p.Zopt, w, dev) == p.NFmin
    re = np.linspace(0.5, 1.5, 201) * p.Zopt.real
    im = p.Zopt.imag + np.linspace(-50, 50, 201)
    grid = np.array([[nf_from_params(p, complex(a, b), w, dev) for a in re] for b in im])
    k = np.unravel_index(np.argmin(grid), grid.shape)
    at_opt = (abs(re[k[1]] - p.Zopt.real) <= re[1] - re[0]
              and abs(im[k[0]] - p.Zopt.imag) <= im[1] - im[0])
    # grid resolution bound on the excess term at the nearest node
    excess_bound = (2 * (dev.g_m / dev.beta + w ** 2 * dev.g_m / dev.omega_T ** 2) / re[0]
                    * ((re[1] - re[0]) ** 2 + (im[1] - im[0]) ** 2))
    min_ok = at_opt and grid[k] - p.NFmin <= excess_bound
    invariant = all(noise_parameters(dev, L, w).NFmin == p.NFmin
                    for L in (0.0, 0.1e-9, 1e-9, 5e-9))
    fs = np.linspace(0.5e9, dev.omega_T / 3 / (2 * math.pi), 12)
    oracle = noise_correlation_nf(_ce_stage(dev), FrequencyGrid(fs))
    closed = np.array([nf_from_params(noise_parameters(dev, 0.0, x), 50.0, x, dev)
                       for x in 2 * np.pi * fs])
    gap = float(np.max(np.abs(closed - oracle) / oracle))
    ok = floor and min_ok and invariant and gap <= ORACLE_NF_TOL
    verdict(4, ok, f"NF(Zopt)=NFmin {floor}; grid minimum at Zopt {min_ok}; "
            f"NFmin L_e-invariant {invariant}; CE oracle vs closed form worst "
            f"{gap:.1%} (<= {ORACLE_NF_TOL:.0%}) for w <= w_T/3")
    assert ok


def test_criterion_5_friis(verdict):
    two = friis_cascade([(2, 10), (2, 1.0)])
    big = friis_cascade([(2, FRIIS_G1), (5, 1.0)]) - 2
    ok = two == 2.1 and big < FRIIS_TOL
    verdict(5, ok, f"[(2,10),(2,.)] -> {two!r} (== 2.1); G1=1e9 excess {big:.1e} (< {FRIIS_TOL:g})")
    assert ok


def test_criterion_6_power_ratio(verdict):
    ratios = [power_comparison(PowerBudget(v, v, i, i, i))[2]
              for v in (1.2, 1.8, 3.3) for i in (1e-3, 5e-3, 7.3e-3)]
    ok = all(r == 0.5 for r in ratios)
    verdict(6, ok, f"ratio for equal supplies and currents: {sorted(set(ratios))} (== 0.5)")
    assert ok


def test_criterion_7_stability_and_delay(verdict):
    s = np.zeros((3, 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = 0.5
    k = stability(TwoPortSweep(np.linspace(1e9, 2e9, 3), s, (50.0, 50.0))).k
    k_err = float(np.max(np.abs(k - 2.125)))
    pole = 2 * math.pi * 1e9

    def err(n):
        f = np.linspace(1e6, 2e9, n)
        w = 2 * math.pi * f
        tau = group_delay_of(f, 1 / (1 + 1j * w / pole))
        return float(np.max(np.abs(tau - (1 / pole) / (1 + (w / pole) ** 2)))), tau[0]

    errs = [err(n)[0] for n in (201, 401, 801)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    tau0 = err(4001)[1]
    ok = k_err <= K_TOL and all(1.8 < o < 2.2 for o in orders) and abs(tau0 * pole - 1) < 1e-4
    verdict(7, ok, f"K err {k_err:.1e} (<= {K_TOL:g}); delay convergence orders "
            f"{orders[0]:.2f}, {orders[1]:.2f} (~2); tau(0)*p = {tau0 * pole:.6f}")
    assert ok


def _optimized(params, in_p, out_p):
    rep = solve_cancellation(in_p, out_p)
    op = apply_variables(out_p, rep.variables)
    return rep, op


def test_criterion_8_design_suite(verdict):
    converged, flatter, n = 0, 0, len(SUITE_SEEDS)
    for seed in SUITE_SEEDS:
        params, in_p, out_p = design_suite_case(seed)
        rep, op = _optimized(params, in_p, out_p)
        residual = max(rep.residuals.values())
        converged += int(rep.converged and residual < CONVERGED_RESIDUAL)
        good = flatness_score(build_topology("full_lna_fig8", with_output_stage(params, op)))
        pert = with_output_stage(params, replace(op, L_f=1.5 * op.L_f))
        bad = flatness_score(build_topology("full_lna_fig8", pert))
        flatter += int(good < bad)
    share = converged / n
    ok = share >= CONVERGED_SHARE and flatter == n
    verdict(8, ok, f"converged {converged}/{n} = {share:.0%} (>= {CONVERGED_SHARE:.0%}); "
            f"flatter than +50% L_f in {flatter}/{n} (need all)")
    assert ok


def test_criterion_9_default_design_inequalities(verdict):
    params = load_design()
    in_p = input_stage_params(params)
    params["elements"]["L1"] = solve_input_match(in_p, target=in_p.R_s).L
    rep, op = _optimized(params, input_stage_params(params), output_stage_params(params))
    solved = with_output_stage(params, op)
    sw = two_port_sparams(build_topology("full_lna_fig8", solved), FrequencyGrid.log(*UWB, 401))
    st = stability(sw)
    s11, s22 = float(np.max(sw.db("s11"))), float(np.max(sw.db("s22")))
    k_min, d_max = float(np.min(st.k)), float(np.max(st.delta_mag))
    flat = gain_flatness(sw)
    ok = (rep.converged and s11 < RETURN_LOSS_DB and s22 < RETURN_LOSS_DB and k_min > 1
          and d_max < 1 and flat <= FLATNESS_DB)
    verdict(9, ok, f"design solve converged {rep.converged}; S11 max {s11:.2f} dB, "
            f"S22 max {s22:.2f} dB (< {RETURN_LOSS_DB:g}); K min {k_min:.3g} (> 1); "
            f"|delta| max {d_max:.3f} (< 1); flatness {flat:.3f} dB (<= {FLATNESS_DB:g})")
    assert ok

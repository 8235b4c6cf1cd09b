"""Shared fixtures and independent oracles.

The oracles here never call into the package's engines: they are hand
formulas or symbolic nodal analysis, so agreement is a real cross-check.
"""

import functools
import math

import numpy as np
import pytest
import sympy as sp

from uwblna.analytic import InputStageParams, OutputStageParams
from uwblna.circuit import gm_from_bias

UWB = (3.1e9, 10.6e9)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


def random_input_stage(rng):
    """Valid degenerated-stage parameters spread over realistic ranges."""
    I_C = 10 ** rng.uniform(-4, math.log10(20e-3))
    g_m = gm_from_bias(I_C)
    f_T = 10 ** rng.uniform(math.log10(10e9), math.log10(80e9))
    return InputStageParams(rb=rng.uniform(1, 30), g_m=g_m, C_pi=g_m / (2 * math.pi * f_T),
                            L=10 ** rng.uniform(math.log10(0.05e-9), math.log10(5e-9)),
                            R_s=50.0)


def random_output_stage(rng):
    """Output-stage parameters drawn log-uniformly inside the default design bounds."""
    def logu(lo, hi):
        return float(10 ** rng.uniform(math.log10(lo), math.log10(hi)))

    return OutputStageParams(g_m3=gm_from_bias(logu(0.1e-3, 20e-3)),
                             R_f=logu(10, 5000), L_f=logu(0.05e-9, 10e-9),
                             R_2=logu(10, 5000), C_4=logu(10e-15, 10e-12),
                             R_L=50.0, L_4=logu(0.05e-9, 10e-9), C_pi3=logu(0.05e-12, 3e-12))


@functools.lru_cache(maxsize=1)
def _output_stage_symbolic():
    """Numerator coefficients of v_out/i_in for the output stage, as functions.

    Symbolic nodal analysis with nodes b (base, driven by i_in), c
    (collector, output), e (emitter) and m (between R_f and L_f); ideal
    device with C_pi from b to e and g_m3 v_be from c to e.
    """
    s = sp.symbols("s")
    vb, vc, ve, vm = sp.symbols("vb vc ve vm")
    g, Rf, Lf, R2, C4, RL, L4, Cp = syms = sp.symbols("g Rf Lf R2 C4 RL L4 Cp", positive=True)
    eqs = [
        sp.Eq(1, (vb - ve) * s * Cp + (vb - vm) / (s * Lf)),
        sp.Eq(0, g * (vb - ve) + vc / RL + vc / (s * L4) + (vc - vm) / Rf),
        sp.Eq(0, (ve - vb) * s * Cp - g * (vb - ve) + ve / R2 + ve * s * C4),
        sp.Eq(0, (vm - vc) / Rf + (vm - vb) / (s * Lf)),
    ]
    sol = sp.solve(eqs, [vb, vc, ve, vm], dict=True)[0]
    num, den = sp.fraction(sp.factor(sp.together(sol[vc])))
    num_c = sp.Poly(sp.expand(num), s).all_coeffs()[::-1]
    den_c = sp.Poly(sp.expand(den), s).all_coeffs()[::-1]
    return (sp.lambdify(syms, num_c, "math"), sp.lambdify(syms, den_c, "math"))


def _args(p):
    return (p.g_m3, p.R_f, p.L_f, p.R_2, p.C_4, p.R_L, p.L_4, p.C_pi3)


def output_stage_numerator(p):
    """Ascending numerator coefficients of the output-stage v_out/i_in."""
    return np.array(_output_stage_symbolic()[0](*_args(p)), dtype=float)


def output_stage_denominator(p):
    return np.array(_output_stage_symbolic()[1](*_args(p)), dtype=float)


def nonzero_roots(coeffs):
    """Roots of an ascending polynomial, origin roots removed."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    c = np.trim_zeros(c, "b")
    return np.roots(c[::-1]) if c.size > 1 else np.array([])


SUITE_SEEDS = range(50)


def design_suite_case(seed):
    """One case of the fixed random design suite.

    Bias current and the four feedback values are drawn log-uniformly inside
    the default bounds; C_pi of every device scales with I_C (g_m/C_pi held,
    so low currents stay physical); L1 then comes from the input match, as
    in the design flow. Returns (params, input-stage, output-stage).
    """
    from uwblna.design import DEFAULT_BOUNDS, solve_input_match
    from uwblna.topologies import input_stage_params, load_design, output_stage_params

    r = np.random.default_rng(seed)
    v = {k: float(np.exp(r.uniform(*np.log(b)))) for k, b in sorted(DEFAULT_BOUNDS.items())}
    params = load_design()
    for spec in params["devices"].values():
        spec["cpi"] *= v["I_C"] / spec["ic"]
        spec["ic"] = v["I_C"]
    params["elements"].update(Rf=v["R_f"], L3=v["L_f"], R2=v["R_2"], C4=v["C_4"])
    in_p = input_stage_params(params)
    params["elements"]["L1"] = solve_input_match(in_p, target=in_p.R_s).L
    return params, input_stage_params(params), output_stage_params(params)


def cancellation_feasible(in_p, out_p, n_rf=400, n_grid=60):
    """Brute-force check that Z2 = P1 and Z1 = P2 have a solution in the default bounds.

    Z2 = P1 fixes L_f = R_f g_m1 L; on that line the cross-multiplied
    Z1 - P2 numerator is a polynomial in R_f for each (R_2, C_4) on a grid,
    so a sign change along R_f proves a root. R_f is sampled densely around
    2/g_m3, where Z1 sweeps through every value.
    """
    g, RL, L4 = out_p.g_m3, out_p.R_L, out_p.L_4
    inv_p1 = 1 / (in_p.g_m * in_p.L)
    lo, hi = max(10.0, 0.05e-9 * inv_p1), min(5000.0, 10e-9 * inv_p1)
    if lo > hi:
        return False
    rf = list(np.exp(np.linspace(np.log(lo), np.log(hi), n_rf)))
    rf += [2 / g * (1 + sgn * 10.0 ** k) for k in range(-14, 0) for sgn in (-1, 1)]
    Rf = np.array(sorted(x for x in rf if lo <= x <= hi))[:, None, None]
    R2 = np.exp(np.linspace(np.log(10), np.log(5000), n_grid))[None, :, None]
    C4 = np.exp(np.linspace(np.log(10e-15), np.log(10e-12), n_grid))[None, None, :]
    Lf = Rf / inv_p1
    N = g * R2 + 2 - g * Rf
    D = g * Lf + (g * Rf - 2) * R2
    A = Rf * RL * (1 + g * R2)
    B = RL * (1 + g * R2) * Lf + Rf * RL * g * L4
    F = A * D - N * (B + C4 * RL * Rf * (1 + R2))
    s = np.sign(F)
    return bool(np.any(s[1:] * s[:-1] < 0) or np.any(F == 0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)

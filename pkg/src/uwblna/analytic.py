"""Closed-form LNA design equations.

Each function encodes one design relation exactly as published, including
expressions whose algebra looks damaged; the numeric engines are the
independent check and the tests record where the two disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .polezero import PoleZeroSet, RationalTF


@dataclass(frozen=True)
class InputStageParams:
    """Emitter-degenerated input device: base resistance, g_m, C_pi, emitter L, source R."""

    rb: float
    g_m: float
    C_pi: float
    L: float
    R_s: float = 50.0

    @property
    def omega_T(self):
        return self.g_m / self.C_pi


@dataclass(frozen=True)
class OutputStageParams:
    """CE output stage with R_f-L_f shunt and R_2||C_4 series feedback, L_4 || R_L load."""

    g_m3: float
    R_f: float
    L_f: float
    R_2: float
    C_4: float
    R_L: float = 50.0
    L_4: float = 2e-9
    C_pi3: float = 1e-12


@dataclass(frozen=True)
class PowerBudget:
    Vcc1: float
    Vcc2: float
    I1: float
    I2: float
    Ic: float

    def __post_init__(self):
        if min(self.Vcc1, self.Vcc2, self.I1, self.I2, self.Ic) < 0:
            raise DomainError("power budget entries must be non-negative")


def power_comparison(b):
    """(P_cascode, P_current_reuse, ratio) for separately biased vs stacked stages."""
    p_cascode = b.Vcc1 * (b.I1 + b.I2)
    p_reuse = b.Vcc2 * b.Ic
    if p_cascode == 0:
        raise DomainError("two-stage power is zero; ratio undefined")
    return p_cascode, p_reuse, p_reuse / p_cascode


def effective_gm(g_m1, g_m3):
    """Overall transconductance product g_m1*g_m3, the same for both topologies."""
    if not (g_m1 > 0 and g_m3 > 0):
        raise DomainError("transconductances must be positive")
    return g_m1 * g_m3


def cascode_gm(g_m1):
    """Cascode-only claim: unity common-base current gain leaves G = g_m1."""
    return g_m1


def zin_analytic(p, w):
    """r_b + 1/(jw C_pi) + jw L + L g_m / C_pi."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise DomainError("angular frequency must be positive")
    z = p.rb + 1 / (1j * w * p.C_pi) + 1j * w * p.L + p.L * p.g_m / p.C_pi
    return complex(z) if z.ndim == 0 else z


def input_match_resistance(p):
    """Frequency-independent real part of the degenerated input impedance."""
    return p.rb + p.L * p.g_m / p.C_pi


def input_stage_tf(p, simplified=False):
    """i_out / v_s of the degenerated input stage as printed:

        g_m / [((R_s + r_b + L g_m/C_pi) s C_pi + 1 + s^2 L C_pi) (1 + g_m s L)]

    ``simplified=True`` drops the ``s^2 L C_pi + 1`` term, leaving a pole at
    the origin and one at -1/(g_m L).
    """
    r_tot = p.R_s + p.rb + p.L * p.g_m / p.C_pi
    if simplified:
        first = np.array([0.0, r_tot * p.C_pi])
    else:
        first = np.array([1.0, r_tot * p.C_pi, p.L * p.C_pi])
    second = np.array([1.0, p.g_m * p.L])
    den = np.polynomial.polynomial.polymul(first, second)
    return RationalTF(np.array([p.g_m]), den)


def input_stage_quadratic(p):
    """Denominator of the first factor alone: 1 + s C_pi R_tot + s^2 L C_pi."""
    r_tot = p.R_s + p.rb + p.L * p.g_m / p.C_pi
    return np.array([1.0, r_tot * p.C_pi, p.L * p.C_pi])


def simplification_bound(p, w):
    """Upper bound on |full - simplified| / |full| for ``input_stage_tf``.

    The two forms differ by the factor (1 - w^2 L C_pi) against
    j w C_pi R_tot, so the relative gap never exceeds
    |1 - w^2 L C_pi| / (w C_pi R_tot): small when the input loop has low Q.
    """
    r_tot = p.R_s + p.rb + p.L * p.g_m / p.C_pi
    w = np.asarray(w, dtype=float)
    return np.abs(1 - w ** 2 * p.L * p.C_pi) / (w * p.C_pi * r_tot)


def input_stage_poles(p):
    """The pole pair attributed to the emitter inductor: 0 and -1/(g_m L)."""
    poles = [0.0] if p.L == 0 else [-1.0 / (p.g_m * p.L), 0.0]
    return PoleZeroSet(poles=np.array(poles, dtype=complex),
                       zeros=np.array([], dtype=complex), gain=p.g_m)


def z1_published(p):
    den = p.g_m3 * p.L_f + (p.g_m3 * p.R_f - 2) * p.R_2
    if den == 0:
        raise DomainError("Z1 denominator g_m3*L_f + (g_m3*R_f - 2)*R_2 vanishes")
    return -(p.g_m3 * p.R_2 + 2 - p.g_m3 * p.R_f) / den


def z2_published(p):
    if p.L_f == 0:
        raise DomainError("Z2 = -R_f/L_f needs L_f != 0")
    return -p.R_f / p.L_f


def p2_published(p):
    den = (p.R_L * (1 + p.g_m3 * p.R_2) * p.L_f
           + p.C_4 * (p.R_L * p.R_f + p.R_2 * p.R_L * p.R_f)
           + p.R_f * p.R_L * p.g_m3 * p.L_4)
    if den == 0:
        raise DomainError("P2 denominator vanishes (check L_f, C_4, L_4)")
    return -p.R_f * p.R_L * (1 + p.g_m3 * p.R_2) / den


def output_stage_zeros_pole(p):
    """Z0 = 0, Z1, Z2 = -R_f/L_f and the extra pole P2, as printed."""
    zeros = np.array([0.0, z1_published(p), z2_published(p)], dtype=complex)
    return PoleZeroSet(poles=np.array([p2_published(p)], dtype=complex),
                       zeros=zeros, gain=1.0)


def omega_ref(f0=6.5e9):
    return 2 * math.pi * f0

"""Two-port noise: closed-form device noise parameters and a circuit-level oracle.

Densities are single-sided per hertz. The closed forms cover only the
common-emitter device (base shot noise uses I_B = I_C / beta); the oracle
sums every physical source in the expanded circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .circuit import K_BOLTZMANN, Q_ELECTRON, T_DEFAULT, expand_devices
from .errors import DomainError, NumericError, PortError
from .mna import FrequencyGrid, assemble, solve_ac


@dataclass(frozen=True)
class NoiseParams:
    Rn: float
    Zopt: complex
    NFmin: float

    @property
    def nfmin_db(self):
        return 10 * math.log10(self.NFmin)


@dataclass(frozen=True)
class NoiseSpectra:
    freqs: np.ndarray
    v2: np.ndarray
    i2: np.ndarray


def _noise_conductance(p, w):
    """g_m/beta + w^2 g_m / w_T^2, the bracket shared by the noise formulas."""
    return p.g_m / p.beta + w ** 2 * p.g_m / p.omega_T ** 2


def viedi_squared(p, L, w):
    """Equivalent input noise voltage density (V^2/Hz) of the degenerated device."""
    kT = K_BOLTZMANN * p.T
    q = Q_ELECTRON
    wl2 = (w * L) ** 2
    return (4 * kT * p.r_b + 2 * q * p.I_C / p.g_m ** 2 + 2 * q * p.I_B * wl2
            + (w / p.omega_T) ** 2 * 2 * q * p.I_C * wl2)


def iiedi_squared(p, w):
    """Equivalent input noise current density (A^2/Hz); independent of L."""
    q = Q_ELECTRON
    return 2 * q * p.I_B + (w / p.omega_T) ** 2 * 2 * q * p.I_C


def noise_parameters(p, L_e, w):
    """(Rn, Zopt, NFmin) of the degenerated device as published.

    Raises ``NumericError`` when the Rn expression turns negative, which
    means the formula has left its range of validity.
    """
    if not w > 0:
        raise DomainError("angular frequency must be positive")
    g = _noise_conductance(p, w)
    wt = p.omega_T
    rn = p.r_b + 0.5 * g * w ** 2 * L_e ** 2 + 1 / (2 * p.g_m) - (w / wt) * w * L_e
    if rn < 0:
        raise NumericError(f"Rn = {rn:.4g} ohm is negative at w = {w:.4g} rad/s")
    inv_beta = 1 / p.beta
    re = math.sqrt(2 * g * p.r_b + inv_beta) / g
    im = w / (wt * p.g_m / p.beta + w ** 2 * p.g_m / wt) - w * L_e
    nfmin = 1 + 2 * math.sqrt(g + inv_beta)
    return NoiseParams(Rn=rn, Zopt=complex(re, im), NFmin=nfmin)


def nf_from_params(np_, Zs, w, p):
    """Noise factor at source impedance ``Zs``:
    NFmin + 2 (g_m/beta + w^2 g_m/w_T^2) / R_s * |Zopt - Zs|^2."""
    Zs = complex(Zs)
    if not Zs.real > 0:
        raise DomainError(f"source resistance must be positive, got {Zs!r}")
    return np_.NFmin + 2 * _noise_conductance(p, w) / Zs.real * abs(np_.Zopt - Zs) ** 2


def friis_cascade(stages):
    """Total noise factor of cascaded (F, available gain) stages."""
    stages = list(stages)
    if not stages:
        raise DomainError("Friis cascade needs at least one stage")
    total = 0.0
    gain = 1.0
    for k, (F, G) in enumerate(stages):
        if not F >= 1:
            raise DomainError(f"stage {k + 1}: noise factor must be >= 1, got {F!r}")
        total += F if k == 0 else (F - 1) / gain
        if k < len(stages) - 1:
            if not G > 0:
                raise DomainError(f"stage {k + 1}: gain must be positive, got {G!r}")
            gain *= G
    return total


def to_db(factor):
    return 10 * np.log10(factor)


def _sources(expanded, temperature, device_noise):
    """(n+, n-, density A^2/Hz) for every noisy element."""
    out = []
    if not device_noise:
        return out
    kT4 = 4 * K_BOLTZMANN * temperature
    for comp in expanded.components:
        if not comp.noisy:
            continue
        if comp.kind == "R":
            density = (2 * Q_ELECTRON * comp.shot_current if comp.shot_current is not None
                       else kT4 / comp.value)
            out.append((comp.nodes[0], comp.nodes[1], density))
        elif comp.kind == "G" and comp.shot_current:
            out.append((comp.nodes[0], comp.nodes[1], 2 * Q_ELECTRON * comp.shot_current))
    return out


class _NoiseSetup:
    def __init__(self, circuit, Zs, temperature, device_noise):
        if not circuit.ports:
            raise PortError("noise analysis needs at least one port")
        Zs = float(np.real(Zs))
        if not Zs > 0:
            raise DomainError("source resistance must be positive")
        ports = (replace(circuit.ports[0], z0=Zs),) + circuit.ports[1:]
        self.circuit = replace(circuit, ports=ports)
        self.expanded = expand_devices(self.circuit)
        self.pencil = assemble(self.expanded, terminate="all")
        self.src = ports[0]
        self.out = ports[-1]
        self.Zs = Zs
        self.device = _sources(self.expanded, temperature, device_noise)
        self.kT4 = 4 * K_BOLTZMANN * temperature
        cols = [self.pencil.injection(self.src.pos, self.src.neg)]
        cols += [self.pencil.injection(a, b) for a, b, _ in self.device]
        self.rhs = np.column_stack(cols)
        self.dens = np.array([self.kT4 / Zs] + [d for _, _, d in self.device])
        self.sel = self.pencil.selector(self.out.pos, self.out.neg)

    def transfers(self, f):
        """Transimpedance from each noise current to the output voltage."""
        return self.sel @ solve_ac(self.pencil, f, self.rhs)

    def output_density(self, f):
        t = self.transfers(f)
        powers = self.dens * np.abs(t) ** 2
        return powers[0], powers[1:].sum(), t[0]


def noise_correlation_nf(circuit, grid, Zs=50.0, *, temperature=T_DEFAULT, device_noise=True):
    """Noise factor per frequency from superposition of every noise source.

    Port 1 is the signal input with source resistance ``Zs``; the last
    port is the output, terminated noiselessly in its reference impedance.
    Sources: 4kT/R for each resistor (r_b included), 2qI_B across r_pi,
    2qI_C across each collector-emitter VCCS. NF = total output noise /
    output noise from the source resistance alone, so it is exactly 1 with
    ``device_noise=False``.
    """
    grid = grid if isinstance(grid, FrequencyGrid) else FrequencyGrid(grid)
    setup = _NoiseSetup(circuit, Zs, temperature, device_noise)
    nf = np.empty(len(grid))
    for k, f in enumerate(grid.points):
        src, dev, _ = setup.output_density(f)
        if src == 0:
            raise NumericError(f"source noise does not reach the output at {f:g} Hz")
        nf[k] = (src + dev) / src
    return nf


def equivalent_input_noise(circuit, grid, *, temperature=T_DEFAULT, short_ohms=1e-6, open_ohms=1e12):
    """Input-referred noise voltage and current densities from the circuit.

    v^2 is the device output noise with the input (port 1) shorted, divided
    by the squared source-voltage gain; i^2 the same with the input open,
    divided by the squared transimpedance. Source-resistor noise is
    excluded from both.
    """
    grid = grid if isinstance(grid, FrequencyGrid) else FrequencyGrid(grid)
    shorted = _NoiseSetup(circuit, short_ohms, temperature, True)
    opened = _NoiseSetup(circuit, open_ohms, temperature, True)
    v2 = np.empty(len(grid))
    i2 = np.empty(len(grid))
    for k, f in enumerate(grid.points):
        _, dev, t = shorted.output_density(f)
        # transimpedance from the Norton current; v_s = i * Zs
        v2[k] = dev / (abs(t) / short_ohms) ** 2
        _, dev, t = opened.output_density(f)
        i2[k] = dev / abs(t) ** 2
    return NoiseSpectra(np.asarray(grid.points), v2, i2)

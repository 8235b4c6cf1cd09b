"""Design solvers: input match, feedback zero-pole cancellation, noise sizing, flatness.

The cancellation objective uses the closed-form pole and zero expressions
from ``analytic``; every residual is relative to the pole it targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .analytic import OutputStageParams, input_match_resistance
from .circuit import gm_from_bias
from .errors import DomainError, InfeasibleError, NumericError
from .mna import FrequencyGrid, gain_flatness, two_port_sparams
from .noise import nf_from_params, noise_parameters, to_db

CONVERGED_TOL = 1e-3
N_STARTS = 8
GRID_POINTS = 33  # line-search scan per coordinate
_EXACT = 1e-12  # residuals at rounding level count as an exact fixed point

DEFAULT_BOUNDS = {
    "L": (0.05e-9, 10e-9),
    "I_C": (0.1e-3, 20e-3),
    "R_f": (10.0, 5000.0),
    "L_f": (0.05e-9, 10e-9),
    "R_2": (10.0, 5000.0),
    "C_4": (10e-15, 10e-12),
}
CANCEL_VARS = ("R_f", "L_f", "R_2", "C_4")
PAIRINGS = {
    # name -> ((zero, pole), (zero, pole))
    "direct": (("Z1", "P1"), ("Z2", "P2")),
    "swapped": (("Z2", "P1"), ("Z1", "P2")),
}


@dataclass(frozen=True)
class DesignVariables:
    L: float | None = None
    I_C: float | None = None
    R_f: float | None = None
    L_f: float | None = None
    R_2: float | None = None
    C_4: float | None = None
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))

    def as_dict(self):
        return {k: getattr(self, k) for k in ("L", "I_C", "R_f", "L_f", "R_2", "C_4")}


@dataclass(frozen=True)
class DesignReport:
    variables: DesignVariables
    residuals: dict
    flatness_db: float | None = None
    nf_db_band: tuple | None = None
    converged: bool = False
    iterations: int = 0
    pairing: str | None = None

    def to_dict(self):
        return {
            "variables": self.variables.as_dict(),
            "bounds": {k: list(v) for k, v in self.variables.bounds.items()},
            "residuals": dict(self.residuals),
            "flatness_db": self.flatness_db,
            "nf_db_band": None if self.nf_db_band is None else list(self.nf_db_band),
            "converged": self.converged,
            "iterations": self.iterations,
            "pairing": self.pairing,
        }


def _check_bounds(bounds):
    for name, (lo, hi) in bounds.items():
        if not (0 < lo <= hi and math.isfinite(hi)):
            raise InfeasibleError(f"bounds for {name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")


def golden_section(f, a, b, tol):
    """Minimise a unimodal ``f`` on [a, b]; returns (x, iterations)."""
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2, it


def _merged_bounds(bounds):
    out = dict(DEFAULT_BOUNDS)
    out.update(bounds or {})
    _check_bounds(out)
    return out


# -- input match ------------------------------------------------------------

def solve_input_match(p, target=50.0, free="L", *, device=None, bounds=None):
    """Solve r_b + L g_m / C_pi = ``target`` for ``free`` in {"L", "I_C"}.

    For ``"L"`` the answer is closed-form. For ``"I_C"`` g_m follows the
    bias current and C_pi follows it too when ``device`` (a HybridPiParams
    with the device's omega_T and C_bc) is given, otherwise C_pi is held;
    the root is bracketed inside the I_C bounds and bisected. ``bounds``
    (merged into the defaults) are enforced only when passed explicitly.
    """
    if target < p.rb:
        raise InfeasibleError(f"target {target} ohm is below r_b = {p.rb} ohm; no positive L exists")
    merged = _merged_bounds(bounds)
    if free == "L":
        L = float((target - p.rb) * p.C_pi / p.g_m)
        if bounds is not None and "L" in bounds:
            lo, hi = merged["L"]
            if not lo <= L <= hi:
                raise InfeasibleError(f"L = {L:.4g} H lies outside bounds [{lo:.4g}, {hi:.4g}]")
        I_C = device.I_C if device is not None else None
        return DesignVariables(L=L, I_C=I_C, bounds=merged)
    if free != "I_C":
        raise DomainError(f"free variable must be 'L' or 'I_C', got {free!r}")
    if target == p.rb:
        raise InfeasibleError("target equals r_b: would need g_m = 0")

    def resistance(I_C):
        g_m = gm_from_bias(I_C, device.T if device is not None else 300.0)
        c_pi = device.with_bias(I_C).C_pi if device is not None else p.C_pi
        return p.rb + p.L * g_m / c_pi - target

    lo, hi = merged["I_C"]
    try:
        f_lo, f_hi = resistance(lo), resistance(hi)
    except DomainError as exc:
        raise InfeasibleError(f"device model breaks down inside the I_C bounds: {exc}") from None
    if f_lo * f_hi > 0:
        raise InfeasibleError(
            f"Re(Zin) stays {'above' if f_lo > 0 else 'below'} {target} ohm for I_C in [{lo:g}, {hi:g}] A")
    I_C = optimize.bisect(resistance, lo, hi, xtol=1e-18, rtol=4 * np.finfo(float).eps, maxiter=200)
    return DesignVariables(L=p.L, I_C=float(I_C), bounds=merged)


# -- zero-pole cancellation -------------------------------------------------

def _fractions(in_p, op):
    """Each root as (N, D) with root = -N/D, so residuals can be cross-multiplied."""
    g = op.g_m3
    return {
        "P1": (1.0, in_p.g_m * in_p.L),
        "Z1": (g * op.R_2 + 2 - g * op.R_f, g * op.L_f + (g * op.R_f - 2) * op.R_2),
        "Z2": (op.R_f, op.L_f),
        "P2": (op.R_f * op.R_L * (1 + g * op.R_2),
               op.R_L * (1 + g * op.R_2) * op.L_f
               + op.C_4 * (op.R_L * op.R_f + op.R_2 * op.R_L * op.R_f)
               + op.R_f * op.R_L * g * op.L_4),
    }


def _pair_terms(in_p, op, pairing):
    """Per pair: (relative residual |Z - P|/|P|, continuous signed residual)."""
    fr = _fractions(in_p, op)
    out = []
    for zname, pname in PAIRINGS[pairing]:
        nz, dz = fr[zname]
        n_p, d_p = fr[pname]
        # Z - P = (n_p dz - nz d_p) / (dz d_p); the numerator has no poles
        cross = n_p * dz - nz * d_p
        scale = abs(n_p * dz) + abs(nz * d_p)
        signed = cross / scale if scale > 0 else 0.0
        if dz == 0 or d_p == 0 or n_p == 0:
            rel = math.inf
        else:
            rel = abs(cross / (dz * d_p)) / abs(n_p / d_p)
        out.append((rel, signed))
    return out


def cancellation_residuals(in_p, op, pairing="swapped"):
    """Dict of the two relative residuals, keyed like ``z1p1_rel``."""
    terms = _pair_terms(in_p, op, pairing)
    return {f"{z.lower()}{p.lower()}_rel": float(t[0])
            for (z, p), t in zip(PAIRINGS[pairing], terms)}


class _Cancellation:
    def __init__(self, in_p, out_p, free, bounds, pairing):
        self.in_p = in_p
        self.out_p = out_p
        self.free = tuple(free)
        self.pairing = pairing
        self.lo = np.log([bounds[v][0] for v in self.free])
        self.hi = np.log([bounds[v][1] for v in self.free])
        self.evals = 0

    def params(self, x):
        return replace(self.out_p, **dict(zip(self.free, np.exp(x))))

    def terms(self, x):
        self.evals += 1
        return _pair_terms(self.in_p, self.params(x), self.pairing)

    def objective(self, x):
        return max(t[0] for t in self.terms(x))

    def _span(self, x, d):
        """Step interval keeping x + t d inside the box."""
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (self.lo - x) / d
            b = (self.hi - x) / d
        nz = d != 0
        lo = np.minimum(a, b)[nz]
        hi = np.maximum(a, b)[nz]
        return float(np.max(lo)), float(np.min(hi))

    def line_search(self, x, d):
        """Best point on the line x + t d across the whole box.

        A coarse scan finds sign changes of each signed residual; each is
        refined to a root with Brent's method. Golden-section search polishes
        around the best scanned point for when no exact root exists.
        """
        t_lo, t_hi = self._span(x, d)
        grid = np.linspace(t_lo, t_hi, GRID_POINTS)

        def at(t):
            return np.clip(x + t * d, self.lo, self.hi)

        scan = [self.terms(at(t)) for t in grid]
        cands = [0.0]
        for k in range(len(scan[0])):
            signs = np.array([sc[k][1] for sc in scan])
            for j in np.flatnonzero(signs[:-1] * signs[1:] < 0):
                fk = lambda t, k=k: self.terms(at(t))[k][1]
                try:
                    cands.append(optimize.brentq(fk, grid[j], grid[j + 1],
                                                 xtol=1e-15, rtol=4 * np.finfo(float).eps))
                except (ValueError, RuntimeError):
                    pass
            cands.extend(grid[signs == 0])
        vals = [max(t[0] for t in sc) for sc in scan]
        j = int(np.argmin(vals))
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, GRID_POINTS - 1)]
        if b > a:
            cands.append(golden_section(lambda t: self.objective(at(t)), a, b, 1e-12)[0])
        cands.append(grid[j])
        best = min(cands, key=lambda t: (self.objective(at(t)), t != 0.0))
        return at(best)

    def directions(self):
        """Coordinate axes, then pairwise diagonals for ridges that couple two variables."""
        n = len(self.free)
        eye = np.eye(n)
        dirs = list(eye)
        for i in range(n):
            for j in range(i + 1, n):
                dirs.append((eye[i] + eye[j]) / math.sqrt(2))
                dirs.append((eye[i] - eye[j]) / math.sqrt(2))
        return dirs

    def descend(self, x, max_sweeps=50):
        f = self.objective(x)
        improved = 0
        dirs = self.directions()
        for _ in range(max_sweeps):
            if f <= _EXACT:
                break
            f_start = f
            for d in dirs:
                y = self.line_search(x, d)
                fy = self.objective(y)
                if fy < f:
                    x, f = y, fy
                if f <= _EXACT:
                    break
            if f < f_start:
                improved += 1
            if not f < f_start * (1 - 1e-9):
                break
        return x, f, improved


def _starts(n_vars, lo, hi, n=N_STARTS):
    """Deterministic low-discrepancy multi-start grid (Halton, unscrambled)."""
    pts = qmc.Halton(d=n_vars, scramble=False).random(n + 1)[1:]
    return lo + pts * (hi - lo)


def solve_cancellation(in_p, out_p, free=CANCEL_VARS, *, bounds=None, pairing="swapped",
                       tol=CONVERGED_TOL, n_starts=N_STARTS):
    """Place the feedback zeros on the input-stage pole and the output pole.

    Minimises max(|Z_a - P1|/|P1|, |Z_b - P2|/|P2|) over ``free``, where
    ``pairing`` picks (Z_a, Z_b) = (Z1, Z2) ("direct") or (Z2, Z1)
    ("swapped", the default: with Z2 = -R_f/L_f the direct pairing's
    Z2 = P2 has no solution in positive element values). Coordinate descent
    (axes plus pairwise diagonals) runs from the given point and from
    ``n_starts`` Halton-grid starts in log space; the winner is the lowest
    residual, ties going to the earlier start. ``converged`` also requires
    the input match (solved beforehand) within ``tol`` relative. A given
    point that already converges is returned unchanged with 0 iterations.
    Non-convergence is reported, not raised.
    """
    free = tuple(free)
    if len(free) < 2 or len(set(free)) != len(free) or not set(free) <= set(CANCEL_VARS):
        raise DomainError(f"free must name at least two of {CANCEL_VARS}, got {free!r}")
    if pairing not in PAIRINGS:
        raise DomainError(f"pairing must be one of {sorted(PAIRINGS)}, got {pairing!r}")
    bounds = _merged_bounds(bounds)
    prob = _Cancellation(in_p, out_p, free, bounds, pairing)
    values = np.array([getattr(out_p, v) for v in free])
    inside = np.all((np.log(values) >= prob.lo) & (np.log(values) <= prob.hi))
    f0 = max(t[0] for t in _pair_terms(in_p, out_p, pairing))
    matched = abs(input_match_resistance(in_p) - in_p.R_s) < tol * in_p.R_s
    if inside and (f0 <= _EXACT or (f0 < tol and matched)):
        # already converged: keep the given values (near R_f = 2/g_m3 a
        # log/exp round trip alone can move Z1 by 1e-5)
        op, f, improved = out_p, f0, 0
    else:
        given = np.clip(np.log(values), prob.lo, prob.hi)
        seeds = [given] + list(_starts(len(free), prob.lo, prob.hi, n_starts))
        best = None
        for x0 in seeds:
            x, f, improved = prob.descend(x0.copy())
            if best is None or f < best[1]:
                best = (x, f, improved)
            if f <= _EXACT:
                break
        x, f, improved = best
        op = prob.params(x)
    variables = DesignVariables(L=in_p.L, I_C=None, R_f=float(op.R_f), L_f=float(op.L_f),
                                R_2=float(op.R_2), C_4=float(op.C_4), bounds=bounds)
    residuals = {"input_match_ohm": float(abs(input_match_resistance(in_p) - in_p.R_s))}
    residuals.update(cancellation_residuals(in_p, op, pairing))
    return DesignReport(variables=variables, residuals=residuals,
                        converged=bool(f < tol and matched), iterations=improved,
                        pairing=pairing)


def apply_variables(out_p, variables):
    """OutputStageParams with the solved feedback values substituted."""
    return replace(out_p, R_f=variables.R_f, L_f=variables.L_f,
                   R_2=variables.R_2, C_4=variables.C_4)


# -- noise sizing -----------------------------------------------------------

def _band_nf(device, L_e, Zs, w):
    nf = []
    for wk in w:
        np_ = noise_parameters(device, L_e, wk)
        if isinstance(Zs, str):
            nf.append(np_.NFmin)
        else:
            nf.append(nf_from_params(np_, Zs, wk, device))
    return np.array(nf)


def noise_optimize(p, L_e, Zs=50.0, grid=None, *, bounds=None, tol=1e-9):
    """Bias current minimising the band-average closed-form NF.

    ``p`` is the device at any bias; other bias points keep its omega_T.
    ``Zs="zopt"`` evaluates at the optimum source impedance everywhere, so
    the objective is the NFmin profile. Golden-section search in log I_C.
    """
    grid = grid if grid is not None else FrequencyGrid.log(3.1e9, 10.6e9, 41)
    grid = grid if isinstance(grid, FrequencyGrid) else FrequencyGrid(grid)
    if isinstance(Zs, str) and Zs.lower() != "zopt":
        raise DomainError(f"Zs must be an impedance or 'zopt', got {Zs!r}")
    lo, hi = _merged_bounds(bounds)["I_C"]
    w = grid.omega

    def objective(t):
        return float(np.mean(_band_nf(p.with_bias(math.exp(t)), L_e, Zs, w)))

    try:
        objective(math.log(lo))
        objective(math.log(hi))
    except (DomainError, NumericError) as exc:
        raise InfeasibleError(f"noise model invalid at the I_C bounds: {exc}") from None
    t, it = golden_section(objective, math.log(lo), math.log(hi), tol)
    I_C = math.exp(t)
    nf = _band_nf(p.with_bias(I_C), L_e, Zs, w)
    nf_db = to_db(nf)
    return DesignReport(
        variables=DesignVariables(L=L_e, I_C=I_C, bounds=_merged_bounds(bounds)),
        residuals={"nf_band_mean": float(np.mean(nf))},
        nf_db_band=(float(nf_db.min()), float(nf_db.max())),
        converged=True, iterations=it)


# -- flatness ---------------------------------------------------------------

def flatness_score(circuit, band=(3.1e9, 10.6e9), grid=None):
    """Half-ripple of |S21| in dB over ``band`` from a 401-point log sweep.

    With an explicit ``grid`` the band must lie inside it.
    """
    lo, hi = band
    if not 0 < lo < hi:
        raise DomainError(f"invalid band {band!r}")
    grid = grid if grid is not None else FrequencyGrid.log(lo, hi, 401)
    return gain_flatness(two_port_sparams(circuit, grid), band)

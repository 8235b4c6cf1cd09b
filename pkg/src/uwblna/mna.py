"""Modified nodal analysis in the complex frequency domain.

The circuit becomes a pencil ``(G + s*C) x = b``. Unknowns are the
non-ground node voltages followed by one branch current per inductor and
per voltage source. Ports are not part of the network: analyses stamp
their reference impedances as terminations when they need them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .circuit import expand_devices
from .errors import DomainError, PortError, SingularMatrixError, StructureError

RESIDUAL_TOL = 1e-10
RCOND_MIN = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class MNAPencil:
    G: np.ndarray
    C: np.ndarray
    b: np.ndarray
    labels: tuple
    node_index: dict
    branch_index: dict

    @property
    def size(self):
        return self.G.shape[0]

    def matrix(self, s):
        return self.G + s * self.C

    def voltage(self, x, pos, neg=0):
        """v(pos) - v(neg) picked out of a solution vector."""
        v = 0j
        if pos:
            v = v + x[..., self.node_index[pos]]
        if neg:
            v = v - x[..., self.node_index[neg]]
        return v

    def selector(self, pos, neg=0):
        """Row vector ``c`` with ``c @ x == v(pos) - v(neg)``."""
        c = np.zeros(self.size)
        if pos:
            c[self.node_index[pos]] += 1.0
        if neg:
            c[self.node_index[neg]] -= 1.0
        return c

    def injection(self, pos, neg=0, amps=1.0):
        """RHS for a current ``amps`` driven into ``pos`` and out of ``neg``."""
        r = np.zeros(self.size, dtype=complex)
        if pos:
            r[self.node_index[pos]] += amps
        if neg:
            r[self.node_index[neg]] -= amps
        return r


@dataclass(frozen=True)
class FrequencyGrid:
    points: np.ndarray
    spacing: str = "log"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise DomainError("frequency grid needs at least one point")
        if not np.all(pts > 0) or not np.all(np.isfinite(pts)):
            raise DomainError("frequencies must be positive and finite")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("frequencies must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def log(cls, lo, hi, n=401):
        return cls(np.geomspace(lo, hi, n), "log")

    @classmethod
    def linear(cls, lo, hi, n=401):
        return cls(np.linspace(lo, hi, n), "linear")

    @property
    def omega(self):
        return 2 * np.pi * self.points

    def __len__(self):
        return self.points.size


DEFAULT_GRID = FrequencyGrid.log(1e9, 15e9, 401)
UWB_BAND = (3.1e9, 10.6e9)


@dataclass(frozen=True)
class TwoPortSweep:
    freqs: np.ndarray
    s: np.ndarray  # (n, 2, 2) complex
    z0: tuple

    def __post_init__(self):
        if not np.all(np.isfinite(self.s)):
            raise SingularMatrixError("non-finite S-parameters in sweep")

    def __getitem__(self, key):
        """``sweep["s21"]`` -> complex array over frequency."""
        i, j = int(key[1]) - 1, int(key[2]) - 1
        return self.s[:, i, j]

    def db(self, key):
        return 20 * np.log10(np.abs(self[key]))


@dataclass(frozen=True)
class StabilityReport:
    freqs: np.ndarray
    k: np.ndarray
    delta_mag: np.ndarray

    @property
    def unconditionally_stable(self):
        return bool(np.all(self.k > 1) and np.all(self.delta_mag < 1))


def _check_voltage_loops(vsources, nodes):
    parent = {n: n for n in nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for comp in vsources:
        a, b = find(comp.nodes[0]), find(comp.nodes[1])
        if a == b:
            raise StructureError(f"voltage source {comp.label} closes a loop of ideal voltage sources")
        parent[a] = b


def _ports_to_terminate(circuit, terminate):
    if terminate is None:
        return ()
    if terminate == "all":
        return tuple(range(1, len(circuit.ports) + 1))
    return tuple(terminate)


def assemble(circuit, terminate=None):
    """Stamp ``circuit`` into an :class:`MNAPencil`.

    BJTs are expanded first. ``terminate`` is ``None``, ``"all"`` or an
    iterable of 1-based port numbers whose reference impedance is stamped
    as a shunt conductance. ``b`` carries the circuit's own independent
    sources.
    """
    circuit = expand_devices(circuit)
    nodes = [n for n in circuit.nodes if n != 0]
    node_index = {n: i for i, n in enumerate(nodes)}
    branch_comps = [c for c in circuit.components if c.kind in "LV"]
    _check_voltage_loops([c for c in branch_comps if c.kind == "V"], circuit.nodes)
    branch_index = {c.label: len(nodes) + k for k, c in enumerate(branch_comps)}
    size = len(nodes) + len(branch_comps)
    G = np.zeros((size, size))
    C = np.zeros((size, size))
    b = np.zeros(size, dtype=complex)

    def stamp(M, r, c, val):
        if r and c:
            M[node_index[r], node_index[c]] += val

    def stamp2(M, p, n, val):
        stamp(M, p, p, val)
        stamp(M, n, n, val)
        stamp(M, p, n, -val)
        stamp(M, n, p, -val)

    def incidence(k, p, n):
        if p:
            G[node_index[p], k] += 1.0
            G[k, node_index[p]] += 1.0
        if n:
            G[node_index[n], k] -= 1.0
            G[k, node_index[n]] -= 1.0

    for comp in circuit.components:
        kind, nd = comp.kind, comp.nodes
        if kind == "R":
            stamp2(G, nd[0], nd[1], 1.0 / comp.value)
        elif kind == "C":
            stamp2(C, nd[0], nd[1], comp.value)
        elif kind == "L":
            k = branch_index[comp.label]
            incidence(k, nd[0], nd[1])
            C[k, k] -= comp.value
        elif kind == "V":
            k = branch_index[comp.label]
            incidence(k, nd[0], nd[1])
            b[k] = comp.value
        elif kind == "I":
            if nd[0]:
                b[node_index[nd[0]]] -= comp.value
            if nd[1]:
                b[node_index[nd[1]]] += comp.value
        elif kind == "G":
            p, n, cp, cn = nd
            g = comp.value
            stamp(G, p, cp, g)
            stamp(G, p, cn, -g)
            stamp(G, n, cp, -g)
            stamp(G, n, cn, g)
    for k in _ports_to_terminate(circuit, terminate):
        port = circuit.ports[k - 1]
        stamp2(G, port.pos, port.neg, 1.0 / port.z0)

    labels = tuple(f"v({n})" for n in nodes) + tuple(f"i({c.label})" for c in branch_comps)
    return MNAPencil(G, C, b, labels, node_index, branch_index)


def solve_ac(pencil, f, rhs=None):
    """Solve ``(G + j*2*pi*f*C) x = rhs`` (default: the pencil's own sources).

    ``rhs`` may be a matrix of several right-hand sides (one per column).
    Raises :class:`SingularMatrixError` if the system is singular or the
    relative residual exceeds 1e-10.
    """
    if not f > 0:
        raise DomainError(f"frequency must be positive, got {f!r}")
    return solve_at(pencil, 2j * math.pi * f, rhs)


def _equilibrated_rcond(lu, A):
    """Reciprocal 1-norm condition estimate of an already row/column scaled matrix."""
    (gecon,) = scipy.linalg.get_lapack_funcs(("gecon",), (lu,))
    rc, info = gecon(lu, np.linalg.norm(A, 1), norm="1")
    return rc if info == 0 else 0.0


def solve_at(pencil, s, rhs=None):
    """Solve the pencil at an arbitrary complex frequency ``s`` (rad/s).

    Rows and columns are scaled to unit max before factoring, so the
    condition estimate ignores the spread of element magnitudes; an
    estimate below RCOND_MIN means the matrix is singular to working
    precision (e.g. a lossless tank driven at resonance).
    """
    A = pencil.matrix(s)
    rhs = pencil.b if rhs is None else np.asarray(rhs, dtype=complex)
    with np.errstate(divide="ignore"):
        r = 1 / np.max(np.abs(A), axis=1)
        c = 1 / np.max(np.abs(A * r[:, None]), axis=0)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(c))):
        raise SingularMatrixError(f"MNA matrix has an all-zero row or column at s={s:g}")
    As = A * r[:, None] * c[None, :]
    lu, piv = scipy.linalg.lu_factor(As, check_finite=False)
    if _equilibrated_rcond(lu, As) < RCOND_MIN:
        raise SingularMatrixError(f"MNA matrix is singular to working precision at s={s:g}")
    rscale = r if rhs.ndim == 1 else r[:, None]
    cscale = c if rhs.ndim == 1 else c[:, None]
    x = scipy.linalg.lu_solve((lu, piv), rhs * rscale, check_finite=False) * cscale
    scale = np.linalg.norm(rhs)
    if scale > 0:
        # iterative refinement: the residual bound is relative to |b| only,
        # which one backward-stable solve misses when |A||x| >> |b|
        for _ in range(2):
            res = A @ x - rhs
            if np.linalg.norm(res) <= 0.1 * RESIDUAL_TOL * scale:
                break
            x = x - scipy.linalg.lu_solve((lu, piv), res * rscale, check_finite=False) * cscale
        resid = np.linalg.norm(A @ x - rhs) / scale
        if not resid <= RESIDUAL_TOL:
            raise SingularMatrixError(
                f"MNA solve residual {resid:.3g} exceeds {RESIDUAL_TOL:g} at s={s:g}")
    return x


def solve_sweep(pencil, freqs, rhs=None):
    """``solve_ac`` at every frequency in ``freqs``, batched.

    Returns an array with a leading frequency axis. Points whose batched
    solve is ill-conditioned or misses the residual bound are redone by
    ``solve_ac``, which raises the usual errors.
    """
    f = np.asarray(freqs, dtype=float)
    if np.any(~(f > 0)):
        raise DomainError("frequencies must be positive")
    rhs = pencil.b if rhs is None else np.asarray(rhs, dtype=complex)
    s = 2j * np.pi * f
    A = pencil.G[None] + s[:, None, None] * pencil.C[None]
    B = rhs[None, :, None] if rhs.ndim == 1 else rhs[None]
    B = np.broadcast_to(B, (len(f),) + B.shape[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 1 / np.max(np.abs(A), axis=2)
        c = 1 / np.max(np.abs(A * r[:, :, None]), axis=1)
    bad = ~(np.all(np.isfinite(r), axis=1) & np.all(np.isfinite(c), axis=1))
    x = np.zeros(B.shape, dtype=complex)
    ok = ~bad
    if np.any(ok):
        As = A[ok] * r[ok][:, :, None] * c[ok][:, None, :]
        try:
            with np.errstate(all="ignore"):
                rc = 1 / np.linalg.cond(As, 1)
                y = np.linalg.solve(As, B[ok] * r[ok][:, :, None]) * c[ok][:, :, None]
        except np.linalg.LinAlgError:
            rc = np.zeros(int(ok.sum()))
            y = np.zeros(B[ok].shape, dtype=complex)
        x[ok] = y
        scale = np.linalg.norm(B[ok], axis=(1, 2))
        res = np.linalg.norm(A[ok] @ y - B[ok], axis=(1, 2))
        good = (rc >= RCOND_MIN) & np.isfinite(res) & (res <= RESIDUAL_TOL * scale)
        bad[np.flatnonzero(ok)[~good]] = True
    for k in np.flatnonzero(bad):
        xk = solve_ac(pencil, f[k], rhs)
        x[k] = xk[:, None] if xk.ndim == 1 else xk
    return x[:, :, 0] if rhs.ndim == 1 else x


def _port_waves(circuit, pencil, x, drive):
    """Incident/reflected power waves at every port for one solve."""
    a = np.empty(len(circuit.ports), dtype=complex)
    bw = np.empty_like(a)
    for i, port in enumerate(circuit.ports):
        v = pencil.voltage(x, port.pos, port.neg)
        current = ((1.0 if i == drive else 0.0) - v) / port.z0
        root = 2 * math.sqrt(port.z0)
        a[i] = (v + port.z0 * current) / root
        bw[i] = (v - port.z0 * current) / root
    return a, bw


def sparams(circuit, grid):
    """N-port S-matrix per frequency by driving each port in turn.

    Port ``j`` is excited by a 1 V Thevenin source behind its reference
    impedance while every other port sees only its termination. Independent
    sources inside the circuit are zeroed.
    """
    n = len(circuit.ports)
    if n == 0:
        raise PortError("circuit declares no ports")
    grid = grid if isinstance(grid, FrequencyGrid) else FrequencyGrid(grid)
    pencil = assemble(circuit, terminate="all")
    rhs = np.column_stack([
        pencil.injection(p.pos, p.neg, 1.0 / p.z0) for p in circuit.ports])
    out = np.empty((len(grid), n, n), dtype=complex)
    for k, x in enumerate(solve_sweep(pencil, grid.points, rhs)):
        for j in range(n):
            a, bw = _port_waves(circuit, pencil, x[:, j], j)
            out[k, :, j] = bw / a[j]
    return grid.points, out


def two_port_sparams(circuit, grid):
    """S-parameters of a circuit with exactly two ports."""
    if len(circuit.ports) != 2:
        raise PortError(f"two-port analysis needs 2 ports, circuit has {len(circuit.ports)}")
    freqs, s = sparams(circuit, grid)
    return TwoPortSweep(np.asarray(freqs), s, tuple(p.z0 for p in circuit.ports))


def input_impedance(circuit, port, f):
    """Impedance looking into 1-based ``port`` with all other ports terminated.

    ``f`` may be a scalar or an array of frequencies (one assembly for all).
    """
    if not 1 <= port <= len(circuit.ports):
        raise PortError(f"no port {port}; circuit has {len(circuit.ports)}")
    others = [k for k in range(1, len(circuit.ports) + 1) if k != port]
    pencil = assemble(circuit, terminate=others)
    p = circuit.ports[port - 1]
    inj = pencil.injection(p.pos, p.neg)
    z = pencil.voltage(solve_sweep(pencil, np.atleast_1d(f), inj), p.pos, p.neg)
    return complex(z[0]) if np.ndim(f) == 0 else np.asarray(z, dtype=complex)


def stability(sweep):
    """Rollett K and |Delta| per frequency; K is ``inf`` for a unilateral network."""
    s11, s12, s21, s22 = sweep["s11"], sweep["s12"], sweep["s21"], sweep["s22"]
    delta = s11 * s22 - s12 * s21
    loop = np.abs(s12 * s21)
    num = 1 - np.abs(s11) ** 2 - np.abs(s22) ** 2 + np.abs(delta) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(loop > 0, num / (2 * np.where(loop > 0, loop, 1.0)), np.inf)
    return StabilityReport(np.asarray(sweep.freqs), k, np.abs(delta))


def group_delay_of(freqs, h):
    """-d(phase)/d(omega) of a complex response sampled at ``freqs`` (Hz).

    Phase is unwrapped with a pi threshold; the derivative uses second-order
    central differences inside the grid and second-order one-sided ones at
    both ends, so non-uniform (e.g. logarithmic) grids are fine.
    """
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size < 3:
        raise DomainError("group delay needs at least 3 frequency points")
    phase = np.unwrap(np.angle(h), discont=np.pi)
    return -np.gradient(phase, 2 * np.pi * freqs, edge_order=2)


def group_delay(sweep):
    """Group delay of S21 in seconds, one value per sweep frequency."""
    return group_delay_of(sweep.freqs, sweep["s21"])


def band_mask(freqs, band):
    lo, hi = band
    freqs = np.asarray(freqs)
    if not lo <= hi:
        raise DomainError(f"empty band {band!r}")
    slack = 1e-9 * freqs[-1]
    if lo < freqs[0] - slack or hi > freqs[-1] + slack:
        raise DomainError(
            f"band {lo:g}-{hi:g} Hz lies outside the sweep {freqs[0]:g}-{freqs[-1]:g} Hz")
    mask = (freqs >= lo - slack) & (freqs <= hi + slack)
    if not mask.any():
        raise DomainError(f"no sweep points inside band {lo:g}-{hi:g} Hz")
    return mask


def half_ripple(values):
    values = np.asarray(values)
    return float((values.max() - values.min()) / 2)


def gain_flatness(sweep, band=UWB_BAND):
    """Half the peak-to-peak |S21| ripple in dB over ``band``."""
    mask = band_mask(sweep.freqs, band)
    return half_ripple(sweep.db("s21")[mask])

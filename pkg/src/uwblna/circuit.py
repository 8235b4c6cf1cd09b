"""Linear small-signal circuit model and hybrid-pi device expansion.

Nodes are non-negative integers with 0 as ground. Every value is SI.
Circuits are immutable; helpers return new instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import CircuitError, DomainError

Q_ELECTRON = 1.602176634e-19  # C
K_BOLTZMANN = 1.380649e-23  # J/K
T_DEFAULT = 300.0
BETA_DEFAULT = 150.0

KINDS = ("R", "L", "C", "G", "V", "I", "Q")
_N_TERMINALS = {"R": 2, "L": 2, "C": 2, "V": 2, "I": 2, "G": 4, "Q": 3}


def gm_from_bias(I_C, T=T_DEFAULT):
    """Bipolar transconductance q*I_C/(k*T) in siemens."""
    if not I_C > 0:
        raise DomainError(f"collector current must be positive, got {I_C!r}")
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T!r}")
    return Q_ELECTRON * I_C / (K_BOLTZMANN * T)


def cpi_from_ft(g_m, omega_T, C_bc=0.0):
    """Base-emitter capacitance that gives transit frequency ``omega_T`` (rad/s)."""
    if not (g_m > 0 and omega_T > 0 and C_bc >= 0):
        raise DomainError("need g_m > 0, omega_T > 0, C_bc >= 0")
    c_pi = g_m / omega_T - C_bc
    if not c_pi > 0:
        raise DomainError(
            f"C_bc={C_bc:g} F leaves no room for C_pi at omega_T={omega_T:g} rad/s"
        )
    return c_pi


def omega_t(g_m, C_pi, C_bc=0.0):
    return g_m / (C_pi + C_bc)


@dataclass(frozen=True)
class HybridPiParams:
    """Small-signal BJT: r_b, g_m, beta, C_pi, C_bc (+ bias point I_C, T).

    ``beta = inf`` removes r_pi and base shot noise. ``r_o`` defaults to
    infinity (omitted from the expansion).
    """

    r_b: float
    g_m: float
    beta: float = BETA_DEFAULT
    C_pi: float = 0.0
    C_bc: float = 0.0
    I_C: float | None = None
    T: float = T_DEFAULT
    r_o: float = math.inf

    def __post_init__(self):
        if self.I_C is None:
            object.__setattr__(self, "I_C", self.g_m * K_BOLTZMANN * self.T / Q_ELECTRON)
        if not (self.r_b >= 0 and math.isfinite(self.r_b)):
            raise CircuitError(f"r_b must be finite and >= 0, got {self.r_b!r}")
        if not (self.g_m > 0 and math.isfinite(self.g_m)):
            raise CircuitError(f"g_m must be finite and > 0, got {self.g_m!r}")
        if not self.beta > 1:
            raise CircuitError(f"beta must exceed 1, got {self.beta!r}")
        if not (self.C_pi >= 0 and self.C_bc >= 0):
            raise CircuitError("C_pi and C_bc must be >= 0")
        if not (self.C_pi + self.C_bc > 0):
            raise CircuitError("C_pi + C_bc must be > 0 for a finite omega_T")
        if not (self.I_C > 0 and self.T > 0 and self.r_o > 0):
            raise CircuitError("I_C, T and r_o must be positive")

    @classmethod
    def from_bias(cls, I_C, *, r_b, beta=BETA_DEFAULT, C_pi=None, f_T=None,
                  C_bc=0.0, T=T_DEFAULT, r_o=math.inf):
        """Build from a bias current; give either ``C_pi`` or ``f_T`` (Hz)."""
        g_m = gm_from_bias(I_C, T)
        if C_pi is None:
            if f_T is None:
                raise CircuitError("from_bias needs C_pi or f_T")
            C_pi = cpi_from_ft(g_m, 2 * math.pi * f_T, C_bc)
        return cls(r_b=r_b, g_m=g_m, beta=beta, C_pi=C_pi, C_bc=C_bc,
                   I_C=I_C, T=T, r_o=r_o)

    @property
    def omega_T(self):
        return omega_t(self.g_m, self.C_pi, self.C_bc)

    @property
    def I_B(self):
        return self.I_C / self.beta

    @property
    def r_pi(self):
        return self.beta / self.g_m

    def with_bias(self, I_C):
        """Same device at a new collector current with omega_T held fixed."""
        g_m = gm_from_bias(I_C, self.T)
        return replace(self, g_m=g_m, I_C=I_C,
                       C_pi=cpi_from_ft(g_m, self.omega_T, self.C_bc))


@dataclass(frozen=True)
class Component:
    """One circuit element.

    ``nodes`` is (n+, n-) for two-terminal elements, (n+, n-, nc+, nc-) for a
    VCCS whose current g*(v(nc+) - v(nc-)) flows from n+ to n- through the
    element, and (base, collector, emitter) for a BJT. Independent sources
    follow SPICE: a current source pushes current from n+ through itself to n-.

    ``shot_current`` swaps a resistor's thermal noise for shot noise 2*q*I,
    and gives a VCCS a shot-noise current across its output terminals.
    """

    kind: str
    label: str
    nodes: tuple
    value: float = 0.0
    device: HybridPiParams | None = None
    model: str | None = None
    shot_current: float | None = None
    noisy: bool = True

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        if self.kind not in KINDS:
            raise CircuitError(f"{self.label}: unknown element kind {self.kind!r}")
        if len(self.nodes) != _N_TERMINALS[self.kind]:
            raise CircuitError(
                f"{self.label}: {self.kind} needs {_N_TERMINALS[self.kind]} "
                f"terminals, got {len(self.nodes)}", labels=(self.label,))
        if any(n < 0 for n in self.nodes):
            raise CircuitError(f"{self.label}: node ids must be >= 0",
                               labels=(self.label,))
        if self.kind in "RLC":
            if not (self.value > 0 and math.isfinite(self.value)):
                raise CircuitError(
                    f"{self.label}: value must be positive and finite, got {self.value!r}",
                    labels=(self.label,))
        elif self.kind in "GVI":
            if not math.isfinite(self.value):
                raise CircuitError(f"{self.label}: value must be finite",
                                   labels=(self.label,))
        elif self.device is None:
            raise CircuitError(f"{self.label}: BJT without device parameters",
                               labels=(self.label,))


@dataclass(frozen=True)
class Port:
    pos: int
    neg: int = 0
    z0: float = 50.0

    def __post_init__(self):
        if not (self.z0 > 0 and math.isfinite(self.z0)):
            raise CircuitError(f"port reference impedance must be positive, got {self.z0!r}")


@dataclass(frozen=True)
class Probe:
    """Transfer-function request: ``output`` is ("v", n+, n-) or ("i", label);
    ``source`` is a source label or ``"port<k>"`` (1-based)."""

    output: tuple
    source: str


@dataclass(frozen=True)
class Circuit:
    components: tuple = ()
    ports: tuple = ()
    title: str = ""
    probe: Probe | None = None
    _by_label: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "ports", tuple(self.ports))
        by_label = {}
        for comp in self.components:
            if comp.label in by_label:
                raise CircuitError(f"duplicate label {comp.label!r}", labels=(comp.label,))
            by_label[comp.label] = comp
        object.__setattr__(self, "_by_label", by_label)
        self._check_ports()
        self._check_connected()

    def __getitem__(self, label):
        return self._by_label[label]

    def __contains__(self, label):
        return label in self._by_label

    @property
    def nodes(self):
        """All node ids, ground included, ascending."""
        ids = {0}
        for comp in self.components:
            ids.update(comp.nodes)
        for port in self.ports:
            ids.update((port.pos, port.neg))
        return sorted(ids)

    @property
    def has_devices(self):
        return any(c.kind == "Q" for c in self.components)

    def replace_values(self, **values):
        """New circuit with element values swapped by label."""
        comps = []
        missing = set(values) - set(self._by_label)
        if missing:
            raise CircuitError(f"no element labelled {sorted(missing)[0]!r}")
        for comp in self.components:
            if comp.label in values:
                new = values[comp.label]
                comp = replace(comp, device=new) if comp.kind == "Q" else replace(comp, value=float(new))
            comps.append(comp)
        return replace(self, components=tuple(comps))

    def _check_ports(self):
        for k, port in enumerate(self.ports, 1):
            if port.pos == port.neg:
                raise CircuitError(f"port {k} is shorted (n+ == n-)")

    def _check_connected(self):
        parent = {n: n for n in self.nodes}

        def find(n):
            while parent[n] != n:
                parent[n] = parent[parent[n]]
                n = parent[n]
            return n

        def union(a, b):
            parent[find(a)] = find(b)

        for comp in self.components:
            # ideal current sources and VCCS outputs are open circuits
            if comp.kind in "RLCV":
                union(*comp.nodes)
            elif comp.kind == "Q":
                union(comp.nodes[0], comp.nodes[1])
                union(comp.nodes[0], comp.nodes[2])
        for port in self.ports:
            union(port.pos, port.neg)
        ground = find(0)
        floating = [n for n in self.nodes if find(n) != ground]
        if floating:
            users = tuple(c.label for c in self.components if set(c.nodes) & set(floating))
            raise CircuitError(
                "dangling node(s) " + ", ".join(map(str, floating)) + ": no path to ground",
                labels=users, nodes=tuple(floating))


def expand_devices(circuit):
    """Replace every BJT by its hybrid-pi subnetwork.

    Per device: r_b (base to a new internal node b'), r_pi = beta/g_m and
    C_pi (b' to emitter), C_bc (b' to collector) and a VCCS g_m*v(b', e)
    from collector to emitter. Zero-valued or infinite elements are left
    out; with r_b = 0 no internal node is created. Circuits without BJTs
    come back unchanged.
    """
    if not circuit.has_devices:
        return circuit
    next_node = max(circuit.nodes) + 1
    out = []
    for comp in circuit.components:
        if comp.kind != "Q":
            out.append(comp)
            continue
        p = comp.device
        b, c, e = comp.nodes
        tag = comp.label
        if p.r_b > 0:
            bp = next_node
            next_node += 1
            out.append(Component("R", f"R{tag}_rb", (b, bp), p.r_b))
        else:
            bp = b
        if math.isfinite(p.beta):
            out.append(Component("R", f"R{tag}_rpi", (bp, e), p.r_pi, shot_current=p.I_B))
        if p.C_pi > 0:
            out.append(Component("C", f"C{tag}_pi", (bp, e), p.C_pi))
        if p.C_bc > 0:
            out.append(Component("C", f"C{tag}_bc", (bp, c), p.C_bc))
        out.append(Component("G", f"G{tag}_gm", (c, e, bp, e), p.g_m, shot_current=p.I_C))
        if math.isfinite(p.r_o):
            out.append(Component("R", f"R{tag}_ro", (c, e), p.r_o, noisy=False))
    return replace(circuit, components=tuple(out))

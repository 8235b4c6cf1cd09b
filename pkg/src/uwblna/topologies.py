"""Small-signal netlists for the five amplifier topologies.

Node map shared by the multi-stage circuits::

    1  RF input (port 1)          6  cascode output (Q2 collector)
    2  Q1 base                    7  current-reuse node (bypassed by C3)
    3  Q1 emitter (L1 to ground)  8  Q3 base
    4  Q1 collector / Q2 emitter  9  Q3 collector, RF output (port 2)
    5  Q2 base (AC ground)       10  Q3 emitter, 11 R_f-L_3 midpoint

Bias networks only appear through their AC behaviour: the Q1 bias mirror
is an open circuit, supplies are AC ground, and R1 with bypass CB holds
the Q2 base. Parameter sets are dicts shaped like ``designs/default.json``.
"""

from __future__ import annotations

import copy
import json
import math
from importlib import resources

from .circuit import Circuit, Component, HybridPiParams, Port, Probe, cpi_from_ft, gm_from_bias
from .errors import CircuitError, DomainError, ParameterError
from .analytic import InputStageParams, OutputStageParams

TOPOLOGIES = ("two_stage_fig1", "current_reuse_fig2", "full_lna_fig8",
              "input_stage_fig3", "output_stage_fig7")

_DEVICE_KEYS = {"rb", "ic", "gm", "beta", "cpi", "ft", "cbc", "t", "ro"}


def load_design(name="default"):
    """Parameter dict from ``designs/<name>.json`` (a fresh copy)."""
    path = resources.files("uwblna") / "designs" / f"{name}.json"
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParameterError(f"no shipped design named {name!r}") from None
    return json.loads(text)


def apply_overrides(params, overrides):
    """Return a copy of ``params`` with ``{"L1": 3e-10, "Q1.ic": 5e-3}``-style edits.

    ``Q*.field`` sets the field on every device (the stacked devices share
    one bias current).
    """
    out = copy.deepcopy(params)
    for key, value in (overrides or {}).items():
        if "." in key:
            dev, field = key.split(".", 1)
            field = field.lower()
            if field not in _DEVICE_KEYS:
                raise ParameterError(f"unknown device parameter {field!r}")
            targets = list(out["devices"]) if dev == "Q*" else [dev]
            for t in targets:
                if t not in out["devices"]:
                    raise ParameterError(f"no device {t!r}")
                if field in ("cpi", "ft"):
                    out["devices"][t].pop("cpi", None)
                    out["devices"][t].pop("ft", None)
                out["devices"][t][field] = float(value)
        elif key in ("z0", "vcc"):
            out[key] = float(value)
        else:
            out.setdefault("elements", {})[key] = float(value)
    return out


def device_from_spec(name, spec):
    """HybridPiParams from a JSON device entry (``rb``, ``ic``|``gm``, ``cpi``|``ft`` ...)."""
    try:
        T = spec.get("t", 300.0)
        c_bc = spec.get("cbc", 0.0)
        g_m = gm_from_bias(spec["ic"], T) if "ic" in spec else spec["gm"]
        if "cpi" in spec:
            c_pi = spec["cpi"]
        else:
            c_pi = cpi_from_ft(g_m, 2 * math.pi * spec["ft"], c_bc)
        return HybridPiParams(r_b=spec["rb"], g_m=g_m, beta=spec.get("beta", 150.0),
                              C_pi=c_pi, C_bc=c_bc, I_C=spec.get("ic"), T=T,
                              r_o=spec.get("ro", math.inf))
    except KeyError as exc:
        raise ParameterError(f"device {name}: missing parameter {exc.args[0]!r}") from None
    except (CircuitError, DomainError) as exc:
        raise ParameterError(f"device {name}: {exc}") from None


class _Builder:
    def __init__(self, params, which):
        self.params = params
        self.which = which
        self.parts = []

    def value(self, label):
        try:
            return float(self.params["elements"][label])
        except KeyError:
            raise ParameterError(f"{self.which}: missing element value {label!r}") from None

    def device(self, label):
        try:
            spec = self.params["devices"][label]
        except KeyError:
            raise ParameterError(f"{self.which}: missing device {label!r}") from None
        return device_from_spec(label, spec)

    def add(self, kind, label, nodes, value=None):
        v = self.value(label) if value is None else value
        self.parts.append(Component(kind, label, nodes, v))

    def bjt(self, label, b, c, e):
        self.parts.append(Component("Q", label, (b, c, e), device=self.device(label),
                                    model=label.lower()))

    def circuit(self, ports, title, probe=None):
        return Circuit(tuple(self.parts), tuple(ports), title, probe)


def _cascode_front(bld):
    bld.add("C", "C1", (1, 2))
    bld.bjt("Q1", 2, 4, 3)
    bld.add("L", "L1", (3, 0))
    bld.bjt("Q2", 5, 6, 4)
    bld.add("R", "R1", (5, 0))
    bld.add("C", "CB", (5, 0))


def build_topology(which, params=None, overrides=None):
    """Small-signal circuit of one topology with 50-ohm (``z0``) ports."""
    if which not in TOPOLOGIES:
        raise ParameterError(f"unknown topology {which!r}; choose from {', '.join(TOPOLOGIES)}")
    params = apply_overrides(load_design() if params is None else params, overrides)
    z0 = float(params.get("z0", 50.0))
    bld = _Builder(params, which)
    if which == "input_stage_fig3":
        # Q1 collector current is measured through the 0 V source VOUT
        bld.bjt("Q1", 1, 3, 2)
        bld.add("L", "L1", (2, 0))
        bld.add("V", "VOUT", (4, 3), 0.0)
        bld.bjt("Q2", 0, 5, 4)
        return bld.circuit([Port(1, 0, z0), Port(5, 0, z0)], "cascode input stage",
                           Probe(("i", "VOUT"), "port1"))
    if which == "output_stage_fig7":
        bld.add("I", "IIN", (0, 1), 1.0)
        bld.bjt("Q3", 1, 2, 3)
        bld.add("R", "R2", (3, 0))
        bld.add("C", "C4", (3, 0))
        bld.add("R", "Rf", (2, 4))
        bld.add("L", "L3", (4, 1))
        bld.add("L", "L4", (2, 0))
        return bld.circuit([Port(2, 0, z0)], "dual-feedback output stage",
                           Probe(("v", 2, 0), "IIN"))
    _cascode_front(bld)
    bld.add("C", "C2", (6, 8))
    bld.add("L", "L4", (9, 0))
    if which == "two_stage_fig1":
        bld.add("L", "L2", (6, 0))
        bld.bjt("Q3", 8, 9, 0)
        title = "two-stage cascode + CE"
    elif which == "current_reuse_fig2":
        bld.add("L", "L2", (6, 7))
        bld.add("C", "C3", (7, 0))
        bld.bjt("Q3", 8, 9, 7)
        title = "current-reuse cascode + CE"
    else:
        bld.add("L", "L2", (6, 7))
        bld.add("C", "C3", (7, 0))
        bld.bjt("Q3", 8, 9, 10)
        bld.add("R", "R2", (10, 7))
        bld.add("C", "C4", (10, 7))
        bld.add("R", "Rf", (9, 11))
        bld.add("L", "L3", (11, 8))
        title = "current-reuse LNA with dual feedback"
    return bld.circuit([Port(1, 0, z0), Port(9, 0, z0)], title)


def _ideal(g_m, C_pi, r_b=0.0):
    return HybridPiParams(r_b=r_b, g_m=g_m, beta=math.inf, C_pi=C_pi, C_bc=0.0)


def input_stage_circuit(p):
    """Cascode input stage matching the closed-form model: beta infinite, C_bc = 0.

    Port 1 has reference impedance R_s; Q2 copies Q1.
    """
    dev = _ideal(p.g_m, p.C_pi, p.rb)
    parts = (
        Component("Q", "Q1", (1, 3, 2), device=dev),
        Component("L", "L1", (2, 0), p.L),
        Component("V", "VOUT", (4, 3), 0.0),
        Component("Q", "Q2", (0, 5, 4), device=dev),
    )
    return Circuit(parts, (Port(1, 0, p.R_s), Port(5, 0, 50.0)), "cascode input stage",
                   Probe(("i", "VOUT"), "port1"))


def output_stage_circuit(p):
    """Output stage matching the closed-form model: r_b = 0, beta infinite, C_bc = 0,
    driven by a unit current into the base, loaded by R_L (the port) and L_4."""
    parts = (
        Component("I", "IIN", (0, 1), 1.0),
        Component("Q", "Q3", (1, 2, 3), device=_ideal(p.g_m3, p.C_pi3)),
        Component("R", "R2", (3, 0), p.R_2),
        Component("C", "C4", (3, 0), p.C_4),
        Component("R", "Rf", (2, 4), p.R_f),
        Component("L", "L3", (4, 1), p.L_f),
        Component("L", "L4", (2, 0), p.L_4),
    )
    return Circuit(parts, (Port(2, 0, p.R_L),), "dual-feedback output stage",
                   Probe(("v", 2, 0), "IIN"))


def input_stage_params(params):
    """Closed-form input-stage parameters taken from a full design."""
    q1 = device_from_spec("Q1", params["devices"]["Q1"])
    return InputStageParams(rb=q1.r_b, g_m=q1.g_m, C_pi=q1.C_pi,
                            L=float(params["elements"]["L1"]), R_s=float(params.get("z0", 50.0)))


def output_stage_params(params):
    """Closed-form output-stage parameters taken from a full design."""
    q3 = device_from_spec("Q3", params["devices"]["Q3"])
    el = params["elements"]
    return OutputStageParams(g_m3=q3.g_m, R_f=float(el["Rf"]), L_f=float(el["L3"]),
                             R_2=float(el["R2"]), C_4=float(el["C4"]),
                             R_L=float(params.get("z0", 50.0)), L_4=float(el["L4"]),
                             C_pi3=q3.C_pi)


def with_output_stage(params, op):
    """Copy of ``params`` with the feedback elements taken from ``op``."""
    return apply_overrides(params, {"Rf": op.R_f, "L3": op.L_f, "R2": op.R_2, "C4": op.C_4})

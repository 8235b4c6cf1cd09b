"""Netlist text format.

One element per line, ``#`` starts a comment, LF or CRLF line ends::

    .title cascode input stage
    R1 1 0 50                      # R/L/C/V/I: label n+ n- value
    G1 2 0 1 0 40m                 # VCCS: label n+ n- nc+ nc- gm
    Q1 1 3 2 model=hbt             # BJT: label base collector emitter
    .model hbt rb=5 ic=6m beta=150 cpi=1.44p cbc=15f [ft=..] [t=300] [ro=..]
    .port 1 0 z0=50                # ports are numbered in order of appearance
    .tf v(3) port1                 # optional transfer-function probe
    .end

Element lines accept two optional noise flags: ``shot=<amps>`` replaces a
resistor's thermal noise by shot noise, and ``noiseless`` silences it.
"""

from __future__ import annotations

import math
import re

from .circuit import (BETA_DEFAULT, T_DEFAULT, Circuit, Component,
                      HybridPiParams, Port, Probe, cpi_from_ft, gm_from_bias)
from .errors import (CircuitError, DomainError, NetlistSemanticError,
                     NetlistSyntaxError)
from .units import format_value, parse_value

_TOKEN = re.compile(r"\S+")
_TF_OUT = re.compile(r"^(?:v\((\d+)(?:,(\d+))?\)|i\((\w+)\))$", re.IGNORECASE)
_MODEL_KEYS = {"rb", "ic", "gm", "beta", "cpi", "ft", "cbc", "t", "ro"}


class _Line:
    def __init__(self, number, text):
        self.number = number
        self.tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(text)]

    def error(self, message, index=None, cls=NetlistSyntaxError):
        col = self.tokens[index][1] if index is not None and index < len(self.tokens) else None
        return cls(message, self.number, col)


def _value(line, i):
    try:
        return parse_value(line.tokens[i][0])
    except ValueError:
        raise line.error(f"bad value {line.tokens[i][0]!r}", i) from None


def _node(line, i):
    tok = line.tokens[i][0]
    if not tok.isdigit():
        raise line.error(f"node must be a non-negative integer, got {tok!r}", i)
    return int(tok)


def _keyvals(line, start):
    out = {}
    flags = set()
    for i in range(start, len(line.tokens)):
        tok = line.tokens[i][0]
        if "=" in tok:
            key, _, val = tok.partition("=")
            out[key.lower()] = (val, i)
        else:
            flags.add((tok.lower(), i))
    return out, flags


def _build_model(line, name, params):
    unknown = set(params) - _MODEL_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise line.error(f"unknown model parameter {key!r}", params[key][1])
    vals = {}
    for key, (text, i) in params.items():
        try:
            vals[key] = parse_value(text)
        except ValueError:
            raise line.error(f"bad value {text!r} for {key}", i) from None
    if "rb" not in vals:
        raise line.error(f"model {name!r} needs rb=", cls=NetlistSemanticError)
    T = vals.get("t", T_DEFAULT)
    c_bc = vals.get("cbc", 0.0)
    try:
        if "ic" in vals:
            g_m = gm_from_bias(vals["ic"], T)
        elif "gm" in vals:
            g_m = vals["gm"]
        else:
            raise line.error(f"model {name!r} needs ic= or gm=", cls=NetlistSemanticError)
        if "cpi" in vals:
            c_pi = vals["cpi"]
        elif "ft" in vals:
            c_pi = cpi_from_ft(g_m, 2 * math.pi * vals["ft"], c_bc)
        else:
            raise line.error(f"model {name!r} needs cpi= or ft=", cls=NetlistSemanticError)
        return HybridPiParams(r_b=vals["rb"], g_m=g_m, beta=vals.get("beta", BETA_DEFAULT),
                              C_pi=c_pi, C_bc=c_bc, I_C=vals.get("ic"), T=T,
                              r_o=vals.get("ro", math.inf))
    except (CircuitError, DomainError) as exc:
        raise line.error(f"model {name!r}: {exc}", cls=NetlistSemanticError) from None


def parse_netlist(text):
    """Parse netlist text into a validated :class:`Circuit`.

    Raises :class:`NetlistSyntaxError` for malformed lines and
    :class:`NetlistSemanticError` for dangling nodes, non-positive element
    values, duplicate labels or undefined models. Both carry 1-based line
    and column numbers where one applies.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    title = ""
    models = {}
    pending = []  # (line, label, kind, nodes, value, model, extras)
    ports = []
    probe = None
    seen = {}
    for number, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        line = _Line(number, body)
        if not line.tokens:
            continue
        head = line.tokens[0][0]
        lower = head.lower()
        if lower == ".end":
            break
        if lower == ".title":
            title = body[line.tokens[0][1] + len(head):].strip()
        elif lower == ".model":
            if len(line.tokens) < 2:
                raise line.error(".model needs a name", 0)
            name = line.tokens[1][0]
            params, flags = _keyvals(line, 2)
            if flags:
                raise line.error(f"expected key=value, got {min(flags)[0]!r}", min(flags)[1])
            if name in models:
                raise line.error(f"model {name!r} defined twice", 1, NetlistSemanticError)
            models[name] = _build_model(line, name, params)
        elif lower == ".port":
            if len(line.tokens) < 3:
                raise line.error(".port needs <n+> <n->", 0)
            params, flags = _keyvals(line, 3)
            if flags or set(params) - {"z0"}:
                raise line.error(".port accepts only z0=<ohms>", 3)
            z0 = 50.0
            if "z0" in params:
                try:
                    z0 = parse_value(params["z0"][0])
                except ValueError:
                    raise line.error("bad z0 value", params["z0"][1]) from None
            try:
                ports.append((line, Port(_node(line, 1), _node(line, 2), z0)))
            except CircuitError as exc:
                raise line.error(str(exc), 3, NetlistSemanticError) from None
        elif lower == ".tf":
            if len(line.tokens) != 3:
                raise line.error(".tf needs <output> <source>", 0)
            m = _TF_OUT.match(line.tokens[1][0])
            if m is None:
                raise line.error("output must be v(n), v(n,m) or i(label)", 1)
            if m.group(3):
                out = ("i", m.group(3))
            else:
                out = ("v", int(m.group(1)), int(m.group(2) or 0))
            probe = Probe(out, line.tokens[2][0])
        elif head.startswith("."):
            raise line.error(f"unknown directive {head!r}", 0)
        else:
            kind = head[0].upper()
            if kind not in "RLCGVIQ":
                raise line.error(f"unknown element type {head[0]!r}", 0)
            if head in seen:
                raise line.error(f"duplicate label {head!r} (first on line {seen[head]})",
                                 0, NetlistSemanticError)
            seen[head] = number
            pending.append((line, head, kind))

    components = []
    for line, label, kind in pending:
        n_nodes = {"G": 4, "Q": 3}.get(kind, 2)
        if len(line.tokens) < n_nodes + 2:
            raise line.error(f"{label}: expected {n_nodes} nodes and a value", len(line.tokens) - 1)
        nodes = tuple(_node(line, i) for i in range(1, n_nodes + 1))
        params, flags = _keyvals(line, n_nodes + 1)
        if kind == "Q":
            if "model" not in params:
                raise line.error(f"{label}: expected model=<name>", n_nodes + 1)
            name, idx = params.pop("model")
            if name not in models:
                raise line.error(f"{label}: undefined model {name!r}", idx, NetlistSemanticError)
            if params or flags:
                raise line.error(f"{label}: unexpected tokens after model", n_nodes + 2)
            args = dict(device=models[name], model=name)
        else:
            value_index = n_nodes + 1
            if "=" in line.tokens[value_index][0]:
                raise line.error(f"{label}: missing value", value_index)
            value = _value(line, value_index)
            flags.discard((line.tokens[value_index][0].lower(), value_index))
            args = dict(value=value)
            if "shot" in params:
                text, idx = params.pop("shot")
                try:
                    args["shot_current"] = parse_value(text)
                except ValueError:
                    raise line.error(f"bad shot current {text!r}", idx) from None
            for flag, idx in flags:
                if flag != "noiseless":
                    raise line.error(f"unexpected token {flag!r}", idx)
                args["noisy"] = False
            if params:
                key = min(params)
                raise line.error(f"unknown parameter {key!r}", params[key][1])
        try:
            components.append(Component(kind, label, nodes, **args))
        except CircuitError as exc:
            raise line.error(str(exc), n_nodes + 1, NetlistSemanticError) from None

    try:
        return Circuit(components, tuple(p for _, p in ports), title, probe)
    except CircuitError as exc:
        line_of = {label: line for line, label, _ in pending}
        hit = next((line_of[lb] for lb in exc.labels if lb in line_of), None)
        if hit is None and ports:
            hit = ports[0][0]
        raise NetlistSemanticError(str(exc), hit.number if hit else None) from None


def _model_line(name, p):
    parts = [f".model {name}", f"rb={format_value(p.r_b)}", f"ic={format_value(p.I_C)}",
             f"beta={format_value(p.beta)}", f"cpi={format_value(p.C_pi)}",
             f"cbc={format_value(p.C_bc)}", f"t={format_value(p.T)}"]
    if math.isfinite(p.r_o):
        parts.append(f"ro={format_value(p.r_o)}")
    return " ".join(parts)


def format_netlist(circuit):
    """Serialize a circuit; ``parse_netlist(format_netlist(c))`` rebuilds it."""
    lines = []
    if circuit.title:
        lines.append(f".title {circuit.title}")
    models = {}
    for comp in circuit.components:
        if comp.kind == "Q":
            name = comp.model or f"m_{comp.label}"
            if models.get(name, comp.device) != comp.device:
                name = f"m_{comp.label}"
            models[name] = comp.device
    for name, p in models.items():
        lines.append(_model_line(name, p))
    for comp in circuit.components:
        nodes = " ".join(str(n) for n in comp.nodes)
        if comp.kind == "Q":
            name = comp.model if models.get(comp.model) == comp.device else f"m_{comp.label}"
            lines.append(f"{comp.label} {nodes} model={name}")
            continue
        text = f"{comp.label} {nodes} {format_value(comp.value)}"
        if comp.shot_current is not None:
            text += f" shot={format_value(comp.shot_current)}"
        if not comp.noisy:
            text += " noiseless"
        lines.append(text)
    for port in circuit.ports:
        lines.append(f".port {port.pos} {port.neg} z0={format_value(port.z0)}")
    if circuit.probe is not None:
        out = circuit.probe.output
        target = f"i({out[1]})" if out[0] == "i" else (
            f"v({out[1]})" if out[2] == 0 else f"v({out[1]},{out[2]})")
        lines.append(f".tf {target} {circuit.probe.source}")
    lines.append(".end")
    return "\n".join(lines) + "\n"

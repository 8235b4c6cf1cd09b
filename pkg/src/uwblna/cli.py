"""``uwblna`` command line: analyze, noise, polezero, design, report.

Exit codes: 0 success, 1 input error, 2 numeric failure, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export
from .analytic import (PowerBudget, input_stage_poles, output_stage_zeros_pole,
                       power_comparison)
from .design import (DEFAULT_BOUNDS, PAIRINGS, apply_variables, flatness_score,
                     solve_cancellation, solve_input_match)
from .errors import (CircuitError, DomainError, NetlistError, NumericError, ParameterError,
                     PortError, UwbLnaError)
from .mna import (DEFAULT_GRID, UWB_BAND, FrequencyGrid, assemble, band_mask, gain_flatness,
                  group_delay, half_ripple, stability, two_port_sparams)
from .netlist import format_netlist, parse_netlist
from .noise import nf_from_params, noise_correlation_nf, noise_parameters, to_db
from .polezero import cancellation_residual, factor, poles_of, report_dict, transfer_function
from .topologies import (TOPOLOGIES, apply_overrides, build_topology, device_from_spec,
                         input_stage_params, load_design, output_stage_params)
from .units import parse_value

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NOCONVERGE = 0, 1, 2, 3
DIVERGENCE = 0.10  # analytic vs oracle NF flag threshold
DISCLAIMER = ("Computed on a small-signal model with derived element values; "
              "not measured data and not post-layout silicon results.")


class InputError(UwbLnaError):
    pass


@dataclass
class RunConfig:
    command: str
    topology: str | None = None
    netlist: Path | None = None
    params: Path | None = None
    band: tuple | None = None
    points: int = 401
    spacing: str = "log"
    out: Path = Path(".")
    format: str | None = None
    overrides: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def grid(self):
        if self.band is None:
            if self.points == 401 and self.spacing == "log":
                return DEFAULT_GRID
            lo, hi = DEFAULT_GRID.points[0], DEFAULT_GRID.points[-1]
        else:
            lo, hi = self.band
        make = FrequencyGrid.log if self.spacing == "log" else FrequencyGrid.linear
        return make(lo, hi, self.points)

    def flat_band(self):
        """UWB band when the sweep covers it, otherwise the sweep's own span."""
        g = self.grid().points
        if g[0] <= UWB_BAND[0] and g[-1] >= UWB_BAND[1]:
            return UWB_BAND
        return (g[0], g[-1])


# -- argument handling -------------------------------------------------------

def _band(text):
    try:
        lo, hi = (parse_value(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LO:HI, got {text!r}") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"band needs 0 < LO < HI, got {text!r}")
    return (lo, hi)


def _assignment(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected LABEL=VALUE, got {text!r}")
    label, value = text.split("=", 1)
    return label.strip(), value.strip()


def _common(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--topology", choices=TOPOLOGIES, help="built-in circuit")
    src.add_argument("--netlist", type=Path, help="netlist file")
    p.add_argument("--params", type=Path, help="design JSON for built-in topologies")
    p.add_argument("--band", type=_band, help="sweep range LO:HI in Hz (suffixes allowed)")
    p.add_argument("--points", type=int, default=401)
    sp = p.add_mutually_exclusive_group()
    sp.add_argument("--log", dest="spacing", action="store_const", const="log")
    sp.add_argument("--linear", dest="spacing", action="store_const", const="linear")
    p.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                   metavar="LABEL=VALUE", help="override an element or device value (repeatable)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--format", choices=("csv", "json", "s2p"))


def build_parser():
    parser = argparse.ArgumentParser(prog="uwblna", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="S-parameter sweep, stability, group delay")
    _common(a)
    n = sub.add_parser("noise", help="closed-form vs circuit-level noise figure")
    _common(n)
    n.add_argument("--zs", default="50", help="source impedance in ohms, or 'zopt'")
    n.add_argument("--no-device-noise", action="store_true", help="zero every device noise source")
    z = sub.add_parser("polezero", help="transfer function poles, zeros, cancellation residuals")
    _common(z)
    z.add_argument("--source", help="excitation: source label or portK")
    z.add_argument("--output", help="v(n[,m]) or i(label)")
    d = sub.add_parser("design", help="input match + zero-pole cancellation + flatness")
    _common(d)
    d.add_argument("--bound", action="append", type=_assignment, default=[], metavar="NAME=LO:HI",
                   help=f"bound for one of {', '.join(DEFAULT_BOUNDS)} (repeatable)")
    d.add_argument("--pairing", choices=sorted(PAIRINGS), default="swapped")
    d.add_argument("--free", default="R_f,L_f,R_2,C_4", help="comma-separated cancellation variables")
    r = sub.add_parser("report", help="summary metrics of one design")
    _common(r)
    return parser


def config_from(args):
    if args.points < 3:
        raise InputError("--points must be at least 3")
    extra = {k: v for k, v in vars(args).items()
             if k not in {"command", "topology", "netlist", "params", "band", "points",
                          "spacing", "out", "format", "overrides"}}
    return RunConfig(command=args.command, topology=args.topology, netlist=args.netlist,
                     params=args.params, band=args.band, points=args.points,
                     spacing=args.spacing or "log", out=args.out, format=args.format,
                     overrides=dict(args.overrides), extra=extra)


# -- inputs -------------------------------------------------------------------

def _design_params(cfg):
    if cfg.params is None:
        params = load_design()
    else:
        try:
            params = json.loads(cfg.params.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"cannot read {cfg.params}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{cfg.params}: invalid JSON: {exc}") from None
    over = {}
    for label, text in cfg.overrides.items():
        try:
            over[label] = parse_value(text)
        except ValueError as exc:
            raise InputError(f"--set {label}: {exc}") from None
    return apply_overrides(params, over)


def load_circuit(cfg, default="full_lna_fig8"):
    """(circuit, design params or None) for the configured input."""
    if cfg.netlist is not None:
        try:
            text = cfg.netlist.read_text(encoding="utf-8")
        except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
            raise InputError(f"cannot read netlist {cfg.netlist}: {exc.strerror}") from None
        circuit = parse_netlist(text)
        if cfg.overrides:
            values = {}
            for label, v in cfg.overrides.items():
                if label not in circuit:
                    raise InputError(f"--set {label}: no such element in the netlist")
                values[label] = parse_value(v)
            circuit = circuit.replace_values(**values)
        return circuit, None
    params = _design_params(cfg)
    return build_topology(cfg.topology or default, params), params


def _two_port(circuit):
    if len(circuit.ports) != 2:
        raise PortError(f"analysis needs exactly 2 ports, circuit has {len(circuit.ports)}")


def _write(cfg, name, text, written):
    written.append(str(export.write_atomic(cfg.out / name, text)))


def _wants(cfg, kind):
    return cfg.format is None or cfg.format == kind


# -- commands -----------------------------------------------------------------

def sweep_metrics(circuit, grid, band):
    sw = two_port_sparams(circuit, grid)
    st = stability(sw)
    delay = group_delay(sw)
    nf = to_db(noise_correlation_nf(circuit, grid, Zs=circuit.ports[0].z0))
    mask = band_mask(sw.freqs, band)
    s21 = sw.db("s21")
    k = int(np.argmax(np.where(mask, s21, -np.inf)))
    summary = {
        "band_lo_hz": band[0], "band_hi_hz": band[1],
        "gain_flatness_db": gain_flatness(sw, band),
        "peak_s21_db": float(s21[k]), "peak_s21_freq_hz": float(sw.freqs[k]),
        "s11_max_db": float(np.max(sw.db("s11")[mask])),
        "s22_max_db": float(np.max(sw.db("s22")[mask])),
        "s12_max_db": float(np.max(sw.db("s12")[mask])),
        "nf_min_db": float(np.min(nf[mask])), "nf_max_db": float(np.max(nf[mask])),
        "k_min": float(np.min(st.k[mask])), "delta_max": float(np.max(st.delta_mag[mask])),
        "group_delay_variation_s": half_ripple(delay[mask]),
    }
    return sw, st, delay, nf, summary


def cmd_analyze(cfg):
    circuit, _ = load_circuit(cfg)
    _two_port(circuit)
    grid = cfg.grid()
    sw, st, delay, nf, summary = sweep_metrics(circuit, grid, cfg.flat_band())
    written = []
    if _wants(cfg, "csv"):
        _write(cfg, "sparams.csv", export.sparam_csv(sw), written)
        _write(cfg, "metrics.csv", export.metric_csv(sw.freqs, sw.db("s21"), nf, st.k,
                                                     st.delta_mag, delay, summary), written)
    if _wants(cfg, "s2p"):
        _write(cfg, "lna.s2p", export.touchstone(sw, circuit.title or None), written)
    if _wants(cfg, "json"):
        _write(cfg, "summary.json", export.json_text(summary), written)
    return EXIT_OK, written


def _analytic_device(circuit, params):
    """Common-emitter device and emitter inductance for the closed-form noise path."""
    if params is not None and "Q1" in params.get("devices", {}):
        dev = device_from_spec("Q1", params["devices"]["Q1"])
        return dev, float(params.get("elements", {}).get("L1", 0.0))
    qs = [c for c in circuit.components if c.kind == "Q"]
    if not qs:
        raise InputError("noise analysis needs at least one transistor")
    q = qs[0]
    emitter = q.nodes[2]
    L_e = sum(c.value for c in circuit.components
              if c.kind == "L" and set(c.nodes) == {emitter, 0} and emitter != 0)
    return q.device, L_e


def cmd_noise(cfg):
    circuit, params = load_circuit(cfg)
    grid = cfg.grid()
    dev, L_e = _analytic_device(circuit, params)
    zs_text = cfg.extra.get("zs", "50")
    use_zopt = zs_text.strip().lower() == "zopt"
    zs = None if use_zopt else parse_value(zs_text)
    nf_a, nfmin, rn, zopt = [], [], [], []
    for w in grid.omega:
        np_ = noise_parameters(dev, L_e, w)
        nf_a.append(np_.NFmin if use_zopt else nf_from_params(np_, zs, w, dev))
        nfmin.append(np_.NFmin)
        rn.append(np_.Rn)
        zopt.append(np_.Zopt)
    zs_oracle = circuit.ports[0].z0 if use_zopt else zs
    nf_o = noise_correlation_nf(circuit, grid, Zs=zs_oracle,
                                device_noise=not cfg.extra.get("no_device_noise", False))
    nf_a = np.array(nf_a)
    rel = np.abs(nf_a - nf_o) / nf_o
    w_t = dev.omega_T
    flagged = rel > DIVERGENCE
    summary = {
        "device_omega_T": w_t, "emitter_inductance_h": L_e,
        "source": "zopt" if use_zopt else zs,
        "divergence_threshold": DIVERGENCE,
        "divergent_points": int(flagged.sum()),
        "divergent_inside_validity": int((flagged & (grid.omega <= w_t / 3)).sum()),
        "divergent_freqs_hz": [float(f) for f in grid.points[flagged]],
        "max_relative_divergence": float(rel.max()),
    }
    written = []
    if _wants(cfg, "csv"):
        _write(cfg, "noise.csv", export.noise_csv(grid.points, to_db(nf_a), to_db(nf_o),
                                                  to_db(np.array(nfmin)), rn, zopt), written)
    if _wants(cfg, "json"):
        _write(cfg, "noise_summary.json", export.json_text(summary), written)
    return EXIT_OK, written


def _contains(roots, target, tol):
    roots = np.asarray(roots, dtype=complex)
    scale = max(abs(target), 1e-300)
    return bool(roots.size and np.min(np.abs(roots - target)) <= tol * scale)


def cmd_polezero(cfg):
    circuit, params = load_circuit(cfg, default="input_stage_fig3")
    source, output = cfg.extra.get("source"), cfg.extra.get("output")
    if circuit.probe is None and (source is None or output is None):
        if len(circuit.ports) < 2:
            raise InputError("give --source and --output (no .tf line in the input)")
        source = source or "port1"
        out_port = circuit.ports[-1]
        output = output or ("v", out_port.pos, out_port.neg)
    tf = transfer_function(circuit, source, output)
    pz = factor(tf)
    report = report_dict(pz, cancellation_residual(pz))
    pencil = assemble(circuit, terminate="all")
    pencil_poles = poles_of(pencil)
    report["pencil_poles"] = [{"re": float(p.real), "im": float(p.imag)} for p in pencil_poles]
    checks = {}
    topo = cfg.topology or ("input_stage_fig3" if cfg.netlist is None else None)
    if topo == "input_stage_fig3":
        ip = input_stage_params(params)
        p1 = complex(input_stage_poles(ip).poles[0])
        checks = {"P1": p1.real, "P1_in_pencil_poles": _contains(pencil_poles, p1, 1e-6),
                  "P0_in_pencil_poles": bool(np.any(np.abs(pencil_poles) == 0))}
    elif topo == "output_stage_fig7":
        pub = output_stage_zeros_pole(output_stage_params(params))
        z1, z2 = complex(pub.zeros[1]), complex(pub.zeros[2])
        p2 = complex(pub.poles[0])
        checks = {"Z1": z1.real, "Z2": z2.real, "P2": p2.real,
                  "Z2_in_zeros": _contains(pz.zeros, z2, 1e-6),
                  "Z1_within_5pct": _contains(pz.zeros, z1, 0.05),
                  "P2_within_5pct": _contains(pz.poles, p2, 0.05)}
    report["published_checks"] = checks
    written = []
    _write(cfg, "polezero.json", export.json_text(report), written)
    return EXIT_OK, written


def _parse_bounds(items):
    out = {}
    for name, text in items:
        if name not in DEFAULT_BOUNDS:
            raise InputError(f"--bound {name}: unknown variable; choose from {', '.join(DEFAULT_BOUNDS)}")
        try:
            lo, hi = (parse_value(t) for t in text.split(":"))
        except ValueError:
            raise InputError(f"--bound {name}: expected LO:HI, got {text!r}") from None
        out[name] = (lo, hi)
    return out


def cmd_design(cfg):
    if cfg.netlist is not None:
        raise InputError("design works on built-in topologies; use --topology/--params")
    if cfg.topology not in (None, "full_lna_fig8"):
        raise InputError("design solves the full_lna_fig8 topology")
    params = _design_params(cfg)
    bounds = _parse_bounds(cfg.extra.get("bound", []))
    free = tuple(v.strip() for v in cfg.extra.get("free", "R_f,L_f,R_2,C_4").split(",") if v.strip())
    band = cfg.flat_band()
    seed_circuit = build_topology("full_lna_fig8", params)
    seed_flat = flatness_score(seed_circuit, band)

    in_p = input_stage_params(params)
    match = solve_input_match(in_p, target=in_p.R_s, free="L")
    params = apply_overrides(params, {"L1": match.L})
    in_p = input_stage_params(params)
    out_p = output_stage_params(params)
    rep = solve_cancellation(in_p, out_p, free, bounds=bounds or None,
                             pairing=cfg.extra.get("pairing", "swapped"))
    op = apply_variables(out_p, rep.variables)
    params = apply_overrides(params, {"Rf": op.R_f, "L3": op.L_f, "R2": op.R_2, "C4": op.C_4})
    circuit = build_topology("full_lna_fig8", params)
    flat = flatness_score(circuit, band)
    body = rep.to_dict()
    body["flatness_db"] = flat
    body["seed_flatness_db"] = seed_flat
    body["band_hz"] = list(band)
    written = []
    _write(cfg, "design_report.json", export.json_text(body), written)
    _write(cfg, "design_params.json", export.json_text(params), written)
    _write(cfg, "design.net", format_netlist(circuit), written)
    return (EXIT_OK if rep.converged else EXIT_NOCONVERGE), written


TABLE_KEYS = ("Process", "Frequency (GHz)", "Peak S21 (dB)", "Gain flatness (dB)",
              "Minimum NF (dB)", "Group delay variation (ps)", "IIP3 (dBm)",
              "Power consumption (mW)")


def cmd_report(cfg):
    circuit, params = load_circuit(cfg)
    _two_port(circuit)
    band = cfg.flat_band()
    sw, st, delay, nf, s = sweep_metrics(circuit, cfg.grid(), band)
    row = dict.fromkeys(TABLE_KEYS)
    row["Process"] = "small-signal hybrid-pi model"
    row["Frequency (GHz)"] = f"{band[0] / 1e9:g}-{band[1] / 1e9:g}"
    row["Peak S21 (dB)"] = s["peak_s21_db"]
    row["Gain flatness (dB)"] = s["gain_flatness_db"]
    row["Minimum NF (dB)"] = s["nf_min_db"]
    row["Group delay variation (ps)"] = s["group_delay_variation_s"] * 1e12
    row["IIP3 (dBm)"] = None  # needs a large-signal model
    power = {}
    if params is not None and "vcc" in params:
        ic = device_from_spec("Q1", params["devices"]["Q1"]).I_C
        vcc = float(params["vcc"])
        p_cas, p_reuse, ratio = power_comparison(PowerBudget(vcc, vcc, ic, ic, ic))
        row["Power consumption (mW)"] = p_reuse * 1e3
        power = {"two_stage_mw": p_cas * 1e3, "current_reuse_mw": p_reuse * 1e3,
                 "power_ratio": ratio}
    report = {
        "table": row,
        "peak_s21_freq_hz": s["peak_s21_freq_hz"],
        "nf_max_db": s["nf_max_db"],
        "s11_max_db": s["s11_max_db"], "s22_max_db": s["s22_max_db"],
        "s12_max_db": s["s12_max_db"],
        "k_min": s["k_min"], "delta_max": s["delta_max"],
        "unconditionally_stable": bool(s["k_min"] > 1 and s["delta_max"] < 1),
        "group_delay_variation_s": s["group_delay_variation_s"],
        **power,
        "disclaimer": DISCLAIMER,
    }
    written = []
    _write(cfg, "report.json", export.json_text(report), written)
    return EXIT_OK, written


COMMANDS = {"analyze": cmd_analyze, "noise": cmd_noise, "polezero": cmd_polezero,
            "design": cmd_design, "report": cmd_report}


def run(argv=None):
    """Parse ``argv`` and run; returns the exit code instead of exiting."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = config_from(args)
        code, written = COMMANDS[cfg.command](cfg)
    except (InputError, NetlistError, ParameterError, CircuitError, PortError, DomainError) as exc:
        print(f"uwblna: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"uwblna: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"uwblna: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for path in written:
        print(path)
    if code == EXIT_NOCONVERGE:
        print("uwblna: design did not converge; report written", file=sys.stderr)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

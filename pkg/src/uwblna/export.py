"""CSV / JSON / Touchstone writers.

Numbers are written with 9 significant digits so output is byte-for-byte
reproducible; every file is written to a temporary sibling and renamed.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

SPARAM_HEADER = "freq_hz,s11_re,s11_im,s12_re,s12_im,s21_re,s21_im,s22_re,s22_im"
METRIC_HEADER = "freq_hz,s21_db,nf_db,k,delta_mag,group_delay_s"
NOISE_HEADER = "freq_hz,nf_db_analytic,nf_db_oracle,nfmin_db,rn_ohm,zopt_re,zopt_im"


def fmt(x):
    """One number, 9 significant digits; non-finite values as inf/-inf/nan."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _rows(header, columns, footer=()):
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(fmt(v) for v in row))
    lines.extend(footer)
    return "\n".join(lines) + "\n"


def sparam_csv(sweep):
    cols = [sweep.freqs]
    for key in ("s11", "s12", "s21", "s22"):
        cols += [sweep[key].real, sweep[key].imag]
    return _rows(SPARAM_HEADER, cols)


def metric_csv(freqs, s21_db, nf_db, k, delta_mag, delay, summary=None):
    """Derived metrics; ``summary`` pairs become trailing ``# name,value`` lines."""
    footer = [f"# {name},{fmt(v)}" for name, v in (summary or {}).items()]
    return _rows(METRIC_HEADER, [freqs, s21_db, nf_db, k, delta_mag, delay], footer)


def noise_csv(freqs, nf_analytic_db, nf_oracle_db, nfmin_db, rn, zopt):
    zopt = np.asarray(zopt, dtype=complex)
    return _rows(NOISE_HEADER, [freqs, nf_analytic_db, nf_oracle_db, nfmin_db, rn,
                                zopt.real, zopt.imag])


def touchstone(sweep, comment=None):
    """Two-port .s2p text, RI format, frequency in Hz."""
    z0 = sweep.z0[0]
    lines = []
    if comment:
        lines += [f"! {line}" for line in comment.splitlines()]
    lines.append(f"# HZ S RI R {fmt(z0)}")
    # Touchstone 1.0 two-port order: S11 S21 S12 S22
    for i, f in enumerate(sweep.freqs):
        vals = [f]
        for key in ("s11", "s21", "s12", "s22"):
            v = sweep[key][i]
            vals += [v.real, v.imag]
        lines.append(" ".join(fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else None
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def json_text(obj):
    """Stable JSON: 9-digit floats, non-finite values as null, sorted keys off."""
    return json.dumps(_jsonable(obj), indent=2, ensure_ascii=False) + "\n"

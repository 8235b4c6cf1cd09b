"""Rational transfer functions and pole/zero extraction from an MNA pencil."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CircuitError, InterpolationError, SingularMatrixError
from .mna import assemble, solve_at

OMEGA_REF = 2 * math.pi * 6.5e9
COINCIDE_TOL = 1e-3


def _trim(coeffs):
    """Drop exactly-zero leading coefficients.

    Coefficients in powers of s span dozens of decades at RF, so no
    magnitude cut is safe here.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    nz = np.flatnonzero(coeffs)
    if not nz.size:
        return np.zeros(1)
    return coeffs[: nz[-1] + 1].copy()


@dataclass(frozen=True)
class RationalTF:
    """H(s) = num(s)/den(s), coefficients in ascending powers of s.

    ``anchor`` optionally carries the same function in factored form,
    (zeros, poles, s0, H(s0)). When present it is used for evaluation and
    by ``factor``: coefficients of high-order RF networks span too many
    decades to evaluate or re-root to full precision.
    """

    num: np.ndarray
    den: np.ndarray
    anchor: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        den = _trim(self.den)
        if not np.any(den):
            raise ValueError("denominator is identically zero")
        object.__setattr__(self, "num", _trim(self.num))
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        if self.anchor is not None:
            zeros, poles, s0, h0 = self.anchor
            out = np.full(s.shape, h0, dtype=complex)
            for z in zeros:
                out = out * ((s - z) / (s0 - z))
            for p in poles:
                out = out / ((s - p) / (s0 - p))
            return out
        return (np.polynomial.polynomial.polyval(s, self.num)
                / np.polynomial.polynomial.polyval(s, self.den))

    @classmethod
    def from_roots(cls, zeros, poles, gain):
        """gain * prod(s - z) / prod(s - p); ``gain`` is the leading-coefficient ratio."""
        num = gain * np.polynomial.polynomial.polyfromroots(zeros) if len(zeros) else np.array([gain])
        den = np.polynomial.polynomial.polyfromroots(poles) if len(poles) else np.array([1.0])
        return cls(np.real(num), np.real(den))

    @classmethod
    def from_anchor(cls, zeros, poles, s0, h0):
        """Factored H(s) pinned to the value ``h0`` at ``s0``."""
        zeros = _clean_roots(zeros)
        poles = _clean_roots(poles)
        gain = h0 * np.prod(s0 - poles) / np.prod(s0 - zeros)
        tf = cls.from_roots(zeros, poles, float(np.real(gain)))
        object.__setattr__(tf, "anchor", (zeros, poles, complex(s0), complex(h0)))
        return tf

    @property
    def order(self):
        return self.den.size - 1


@dataclass(frozen=True)
class PoleZeroSet:
    poles: np.ndarray
    zeros: np.ndarray
    gain: float


def _sort_roots(roots):
    roots = np.asarray(roots, dtype=complex)
    return roots[np.lexsort((roots.imag, roots.real))]


def _clean_roots(roots, tol=1e-9):
    """Snap near-real roots onto the real axis and sort by (Re, Im)."""
    roots = np.asarray(roots, dtype=complex).copy()
    small = np.abs(roots.imag) <= tol * np.maximum(np.abs(roots), np.finfo(float).tiny)
    roots[small] = roots[small].real
    return _sort_roots(roots)


def poly_roots(coeffs):
    """Roots of an ascending-coefficient real polynomial via its companion matrix.

    The variable is rescaled by |c0/cn|^(1/n) first so the companion matrix
    stays balanced when roots sit at 1e9..1e12 rad/s.
    """
    c = _trim(coeffs)
    n = c.size - 1
    if n < 1:
        return np.array([], dtype=complex)
    n_zero = 0
    while n_zero < n and c[n_zero] == 0:
        n_zero += 1
    c = c[n_zero:]
    m = c.size - 1
    roots = np.zeros(n_zero, dtype=complex)
    if m >= 1:
        scale = abs(c[0] / c[-1]) ** (1.0 / m)
        scaled = c * scale ** np.arange(m + 1)
        scaled = scaled / scaled[-1]
        companion = np.zeros((m, m))
        companion[1:, :-1] = np.eye(m - 1)
        companion[:, -1] = -scaled[:-1]
        roots = np.concatenate([roots, np.linalg.eigvals(companion) * scale])
    return _clean_roots(roots)


def factor(tf):
    """Zeros, poles and leading-coefficient gain of a rational function."""
    gain = float(tf.num[-1] / tf.den[-1])
    if tf.anchor is not None:
        zeros, poles, _, _ = tf.anchor
        return PoleZeroSet(poles=poles.copy(), zeros=zeros.copy(), gain=gain)
    return PoleZeroSet(poles=poly_roots(tf.den), zeros=poly_roots(tf.num), gain=gain)


def _pencil_scale(pencil):
    g = np.linalg.norm(pencil.G, 1)
    c = np.linalg.norm(pencil.C, 1)
    return g / c if c > 0 and g > 0 else 1.0


def _finite_eigvals(A, B, scale):
    try:
        alpha, beta = scipy.linalg.eigvals(A, scale * B, homogeneous_eigvals=True)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrixError(f"eigenvalue solver failed: {exc}") from None
    finite = np.abs(beta) > 1e-10 * np.abs(alpha)
    lam = alpha[finite] / beta[finite] * scale
    # exact origin roots come back at rounding level of the scaled pencil
    lam[np.abs(lam) < 1e-10 * scale] = 0
    return _clean_roots(lam)


def poles_of(pencil):
    """Finite generalized eigenvalues of (-G, C), i.e. roots of det(G + sC).

    Infinite eigenvalues from a rank-deficient C are dropped. Returned in
    rad/s, sorted by (Re, Im).
    """
    return _finite_eigvals(-pencil.G, pencil.C, _pencil_scale(pencil))


def system_zeros(pencil, rhs, c):
    """Finite zeros of c^T (G + sC)^-1 rhs.

    These are the finite generalized eigenvalues of the bordered system
    matrix [[G + sC, rhs], [c^T, 0]]. Modes the source cannot excite or
    the output cannot see show up here and among the poles alike.
    """
    n = pencil.size
    A = np.zeros((n + 1, n + 1), dtype=complex)
    A[:n, :n] = -pencil.G
    A[:n, n] = -rhs
    A[n, :n] = -c
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = pencil.C
    return _finite_eigvals(A, B, _pencil_scale(pencil))


def _excitation(circuit, pencil, source):
    if source.lower().startswith("port"):
        k = int(source[4:])
        if not 1 <= k <= len(circuit.ports):
            raise CircuitError(f"no port {k}")
        p = circuit.ports[k - 1]
        # 1 V Thevenin source behind z0, as a Norton current into the termination
        return pencil.injection(p.pos, p.neg, 1.0 / p.z0)
    if source not in circuit or circuit[source].kind not in "VI":
        raise CircuitError(f"{source!r} is not an independent source or port")
    only = circuit.replace_values(**{
        c.label: (c.value if c.label == source else 0.0)
        for c in circuit.components if c.kind in "VI"})
    return assemble(only, terminate="all").b


def _selector(pencil, output):
    if output[0] == "v":
        return pencil.selector(output[1], output[2] if len(output) > 2 else 0)
    if output[0] == "i":
        if output[1] not in pencil.branch_index:
            raise CircuitError(f"i({output[1]}) needs an inductor or voltage source")
        c = np.zeros(pencil.size)
        c[pencil.branch_index[output[1]]] = 1.0
        return c
    raise CircuitError(f"bad output spec {output!r}")


def _parse_output(output):
    if isinstance(output, int):
        return ("v", output, 0)
    if isinstance(output, str):
        text = output.strip().lower()
        inner = text[2:-1]
        if text.startswith("v("):
            parts = [int(x) for x in inner.split(",")]
            return ("v", parts[0], parts[1] if len(parts) > 1 else 0)
        if text.startswith("i("):
            return ("i", output.strip()[2:-1])
    return tuple(output)


class TransferProblem:
    """H(s) = c^T (G + sC)^-1 r for one source/output pair of a circuit.

    Every port is terminated in its reference impedance; other independent
    sources are zeroed.
    """

    def __init__(self, circuit, source=None, output=None):
        if source is None or output is None:
            if circuit.probe is None:
                raise CircuitError("no source/output given and circuit has no .tf probe")
            source = source or circuit.probe.source
            output = output or circuit.probe.output
        self.circuit = circuit
        self.pencil = assemble(circuit, terminate="all")
        self.rhs = _excitation(circuit, self.pencil, source)
        self.c = _selector(self.pencil, _parse_output(output))

    def __call__(self, s):
        return complex(self.c @ solve_at(self.pencil, s, self.rhs))

    def det_and_value(self, s):
        A = self.pencil.matrix(s)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        diag = np.diag(lu)
        if np.any(diag == 0):
            raise SingularMatrixError(f"singular at s={s}")
        sign = (-1) ** np.count_nonzero(piv != np.arange(piv.size))
        det = sign * np.prod(diag)
        x = scipy.linalg.lu_solve((lu, piv), self.rhs, check_finite=False)
        return det, complex(self.c @ x)


def _common_roots(zeros, poles, tol):
    zeros = list(zeros)
    keep_poles = []
    for p in poles:
        if zeros:
            d = [abs(p - z) for z in zeros]
            k = int(np.argmin(d))
            if d[k] <= tol * max(abs(p), 1e-300):
                zeros.pop(k)
                continue
        keep_poles.append(p)
    return np.array(zeros, dtype=complex), np.array(keep_poles, dtype=complex)


def transfer_function(circuit, source=None, output=None, *, cancel_tol=1e-6, retries=3):
    """Exact rational H(s) of one source/output pair.

    Poles are the finite eigenvalues of the MNA pencil, zeros those of the
    bordered system matrix, and the constant is fixed by one direct solve
    at an anchor point on the imaginary axis near the pencil's natural
    frequency. An anchor that lands on a singular point is rotated and
    retried up to ``retries`` times. Roots common to numerator and
    denominator (uncontrollable or unobservable modes) within
    ``cancel_tol`` relative are removed.
    """
    prob = TransferProblem(circuit, source, output)
    poles = poles_of(prob.pencil)
    zeros, poles = _common_roots(system_zeros(prob.pencil, prob.rhs, prob.c), poles, cancel_tol)
    radius = _pencil_radius(poles, prob.pencil)
    for attempt in range(retries + 1):
        s0 = 1j * radius * np.exp(-1j * attempt * math.pi / 7)
        near = np.concatenate([zeros, poles])
        if near.size and np.min(np.abs(near - s0)) < 1e-6 * radius:
            continue
        try:
            _, h0 = prob.det_and_value(s0)
        except SingularMatrixError:
            continue
        break
    else:
        raise InterpolationError(f"no regular anchor point in {retries + 1} tries")
    if h0 == 0:
        return RationalTF(np.zeros(1), np.ones(1))
    return RationalTF.from_anchor(zeros, poles, s0, h0)


def _pencil_radius(poles, pencil):
    mags = np.abs(poles[np.abs(poles) > 0])
    if mags.size:
        return float(np.exp(np.mean(np.log(mags))))
    return _pencil_scale(pencil)


def cancellation_residual(pz, omega_ref=OMEGA_REF):
    """Greedy pole-to-zero matching with relative distances.

    Pairs are taken closest first; each zero is claimed once. The distance
    is |p - z| / max(|p|, 1e-3 * omega_ref), so an origin pole/zero pair
    scores 0 instead of 0/0. Poles left without a zero get ``inf``.
    Returns (pole, zero or None, residual) in pole order.
    """
    floor = 1e-3 * omega_ref
    poles = list(np.asarray(pz.poles, dtype=complex))
    zeros = list(np.asarray(pz.zeros, dtype=complex))
    cands = sorted(
        (abs(p - z) / max(abs(p), floor), i, j)
        for i, p in enumerate(poles) for j, z in enumerate(zeros))
    match = {}
    used = set()
    for r, i, j in cands:
        if i in match or j in used:
            continue
        match[i] = (j, r)
        used.add(j)
    out = []
    for i, p in enumerate(poles):
        if i in match:
            j, r = match[i]
            out.append((p, zeros[j], r))
        else:
            out.append((p, None, math.inf))
    return out


def _cplx(z):
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def report_dict(pz, residuals=None):
    """JSON-ready pole/zero report; unmatched residuals become ``null``."""
    residuals = cancellation_residual(pz) if residuals is None else residuals
    return {
        "poles": [_cplx(p) for p in pz.poles],
        "zeros": [_cplx(z) for z in pz.zeros],
        "gain": float(pz.gain),
        "residuals": [
            {"pole": _cplx(p), "zero": None if z is None else _cplx(z),
             "residual": None if math.isinf(r) else float(r)}
            for p, z, r in residuals],
    }

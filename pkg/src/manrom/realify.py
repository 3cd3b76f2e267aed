"""Realification of the complex parametrisation and derived scalar forms.

Real coordinates are ``a_j = 2 Re z_j`` and ``a_{j+n} = 2 Im z_j`` (so a
single conservative mode oscillates with amplitude ``a_1 = rho``).  Each
complex monomial is expanded through ``z_j = (a_j + i a_{j+n}) / 2`` and the
conjugate-symmetric coefficient pairs collapse onto real coefficients; the
residual imaginary part is a numerical-consistency check and must stay
below tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from . import indices as mi
from ._kernels import poly_eval, poly_eval_numpy
from ._npz import savez_deterministic
from .tensors import ModelError

REALIFY_SCHEMA = "manrom-realrom-1"


@lru_cache(maxsize=None)
def _expand_monomial(I, n):
    """Expansion of ``z^I`` in the real coordinates: {exps_tuple: coef}."""
    n2 = 2 * n
    poly = {(0,) * n2: 1.0 + 0.0j}
    for lab in I:
        j = lab % n
        im_coef = 0.5j if lab < n else -0.5j
        new = {}
        for J, c in poly.items():
            J1 = list(J)
            J1[j] += 1
            J1 = tuple(J1)
            new[J1] = new.get(J1, 0.0) + 0.5 * c
            J2 = list(J)
            J2[j + n] += 1
            J2 = tuple(J2)
            new[J2] = new.get(J2, 0.0) + im_coef * c
        poly = new
    return poly


@dataclass
class RealParametrisation:
    """Real-coefficient manifold maps and reduced dynamics.

    ``exps`` (T, 2n) exponents over the real coordinates; ``Psi``/``Ups``
    map reduced states to physical displacement/velocity; ``f`` holds the
    real reduced dynamics ``a' = f(a)``.
    """

    frame: object
    style: str
    order: int
    exps: np.ndarray
    Psi: np.ndarray
    Ups: np.ndarray
    f: np.ndarray
    imag_residue: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.frame.n

    def evaluate(self, a):
        """Physical ``(u, v)`` at the real reduced state ``a`` (2n,)."""
        a = np.asarray(a, dtype=float).reshape(-1)
        return (poly_eval_numpy(self.exps, self.Psi, a),
                poly_eval_numpy(self.exps, self.Ups, a))

    def evaluate_many(self, A):
        """Batch evaluation over columns of ``A`` (2n, m)."""
        mono = np.prod(A[np.newaxis, :, :] **
                       self.exps[:, :, np.newaxis], axis=1)
        return self.Psi @ mono, self.Ups @ mono

    def rhs(self, a):
        """Reduced right-hand side ``a'`` at state ``a``."""
        return poly_eval(self.exps, self.f, np.asarray(a, dtype=float))

    def to_npz(self, path):
        meta = {"schema": REALIFY_SCHEMA, "style": self.style,
                "order": self.order,
                "masters": [m + 1 for m in self.frame.masters],
                "imag_residue": self.imag_residue}
        savez_deterministic(
            path, exps=self.exps, Psi=self.Psi, Ups=self.Ups, f=self.f,
            Phi=self.frame.Phi, MPhi=self.frame.MPhi, lam=self.frame.lam,
            omega=self.frame.omega, xi=self.frame.xi,
            masters=np.array(self.frame.masters, dtype=np.int64),
            meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))

    @classmethod
    def from_npz(cls, path):
        from .spectral import SpectralFrame
        d = np.load(path)
        meta = json.loads(bytes(d["meta"]).decode())
        if meta["schema"] != REALIFY_SCHEMA:
            raise ValueError(f"unsupported real-ROM schema {meta['schema']!r}")
        frame = SpectralFrame(
            masters=tuple(int(m) for m in d["masters"]),
            omega=d["omega"], xi=d["xi"], Phi=d["Phi"], lam=d["lam"],
            MPhi=d["MPhi"])
        return cls(frame=frame, style=meta["style"], order=int(meta["order"]),
                   exps=d["exps"], Psi=d["Psi"], Ups=d["Ups"], f=d["f"],
                   imag_residue=float(meta["imag_residue"]))


def realify(par, imag_rtol=1e-12):
    """Realify a complex :class:`~manrom.parametrise.Parametrisation`.

    The row pairing is ``a_j' = f_j + f_{j*}`` and
    ``a_{j+n}' = -i (f_j - f_{j*})``; all coefficient arrays are expanded
    monomial-by-monomial and collected over real exponent tuples.  Raises
    :class:`ModelError` if the collected coefficients keep an imaginary
    residue above ``imag_rtol`` (relative to the largest coefficient).
    """
    n = par.n
    n2 = 2 * n
    E, P, U, F = par.arrays()
    N = P.shape[0]

    # complex coefficient rows of the real-rate equations
    Fr = np.empty_like(F)
    Fr[:n] = F[:n] + F[n:]
    Fr[n:] = -1j * (F[:n] - F[n:])

    # real monomial layout: same enumeration per order as the complex side
    pos = {}
    exps_list = []
    for p in range(1, par.order + 1):
        for I in mi.enumerate_indices(n2, p):
            pos[I] = len(exps_list)
            exps_list.append(I)
    T = len(exps_list)
    Pr = np.zeros((N, T), dtype=complex)
    Ur = np.zeros((N, T), dtype=complex)
    Gr = np.zeros((n2, T), dtype=complex)

    for t in range(E.shape[0]):
        I = tuple(np.repeat(np.arange(n2), E[t]))
        for J, c in _expand_monomial(I, n).items():
            col = pos[tuple(np.repeat(np.arange(n2), J))]
            Pr[:, col] += c * P[:, t]
            Ur[:, col] += c * U[:, t]
            Gr[:, col] += c * Fr[:, t]

    worst = 0.0
    out = []
    for arr in (Pr, Ur, Gr):
        scale = np.abs(arr).max() or 1.0
        worst = max(worst, np.abs(arr.imag).max() / scale)
        out.append(np.ascontiguousarray(arr.real))
    if worst > imag_rtol:
        raise ModelError(
            f"realification left an imaginary residue of {worst:.3e} "
            f"(relative), above {imag_rtol:g}; the complex coefficients "
            f"violate conjugate symmetry")
    exps = mi.exponents(exps_list, n2)
    return RealParametrisation(frame=par.frame, style=par.style,
                               order=par.order, exps=exps, Psi=out[0],
                               Ups=out[1], f=out[2], imag_residue=worst)


# ----------------------------------------------------------------------
# scalar forms for a single master mode
# ----------------------------------------------------------------------

@dataclass
class PolarForm:
    """``rho' = Re(lam) rho + sum c_rho[m] rho^(2m+3)``,
    ``alpha' = Im(lam) + sum c_alpha[m] rho^(2m+2)`` (m = 0, 1, ...)."""

    lam: complex
    c_rho: np.ndarray
    c_alpha: np.ndarray

    def rho_rate(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = self.lam.real * rho
        for m, c in enumerate(self.c_rho):
            out = out + c * rho ** (2 * m + 3)
        return out

    def backbone(self, rho):
        """Instantaneous oscillation frequency alpha'(rho)."""
        rho = np.asarray(rho, dtype=float)
        out = np.full_like(rho, self.lam.imag)
        for m, c in enumerate(self.c_alpha):
            out = out + c * rho ** (2 * m + 2)
        return out


def polar_single_mode(par, rtol=1e-10):
    """Polar reduced dynamics of a single-mode cnf parametrisation.

    Only monomials ``z (z conj(z))^m`` survive in cnf for one master; any
    other surviving coefficient above ``rtol`` (relative) is an error.
    """
    if par.n != 1:
        raise ValueError("polar form requires a single master mode")
    E, _, _, F = par.arrays()
    lam = par.frame.lam[0]
    scale = max(np.abs(F).max(), 1.0)
    mmax = (par.order - 1) // 2
    c_rho = np.zeros(mmax)
    c_alpha = np.zeros(mmax)
    # row z keeps only z (z zbar)^(m+1): exponent pairs (m+2, m+1)
    allowed = {(m + 2, m + 1): m for m in range(mmax)}
    for t in range(E.shape[0]):
        e = (int(E[t, 0]), int(E[t, 1]))
        if e[0] + e[1] < 2:
            continue  # linear part
        if e in allowed:
            m = allowed[e]
            c_rho[m] = F[0, t].real / 4.0 ** (m + 1)
            c_alpha[m] = F[0, t].imag / 4.0 ** (m + 1)
        elif abs(F[0, t]) > rtol * scale:
            raise ModelError(
                f"reduced dynamics is not in polar normal form: monomial "
                f"z^{e[0]} zbar^{e[1]} carries |f_z| = {abs(F[0, t]):.3e}")
        if (e[1], e[0]) not in allowed and abs(F[1, t]) > rtol * scale:
            raise ModelError(
                f"conjugate-row coefficient off normal form at "
                f"z^{e[0]} zbar^{e[1]}: |f| = {abs(F[1, t]):.3e}")
    return PolarForm(lam=lam, c_rho=c_rho, c_alpha=c_alpha)


@dataclass
class OscillatorForm:
    """``a'' + 2 xi w a' + w^2 a + sum c[(i,j)] a^i (a')^j = 0``."""

    omega: float
    xi: float
    coef: dict

    def accel(self, a, adot):
        s = -2.0 * self.xi * self.omega * adot - self.omega ** 2 * a
        for (i, j), c in self.coef.items():
            s = s - c * a ** i * adot ** j
        return s

    def c_norm(self):
        """(c30, c12) of ``a'' + w^2 a + w^2 a (c30 a^2 + c12 (a'/w)^2)``."""
        c30 = self.coef.get((3, 0), 0.0) / self.omega ** 2
        c12 = self.coef.get((1, 2), 0.0)
        return c30, c12


def oscillator_form(rpar, lin_rtol=1e-10):
    """Second-order oscillator equivalent of a single-mode real ROM.

    Requires the ``a_1`` rate equation to be exactly linear (true for the
    graph style at any order and for normal-form styles up to order 3);
    then ``b = (Re(lam) a - a') / Im(lam)`` turns the pair into
    ``a'' + 2 xi w a' + w^2 a + Im(lam) * NL(a, b(a, a')) = 0``.
    """
    if rpar.n != 1:
        raise ValueError("oscillator form requires a single master mode")
    lam = rpar.frame.lam[0]
    w, xi = float(rpar.frame.omega[0]), float(rpar.frame.xi[0])
    E, f = rpar.exps, rpar.f
    scale = max(np.abs(f).max(), 1.0)
    coef = {}
    for t in range(E.shape[0]):
        ea, eb = int(E[t, 0]), int(E[t, 1])
        fa, fb = f[0, t], f[1, t]
        if (ea, eb) in ((1, 0), (0, 1)):
            pass  # linear part handled in closed form
        elif abs(fa) > lin_rtol * scale:
            raise ModelError(
                f"the a-rate equation is nonlinear (|f| = {abs(fa):.3e} at "
                f"a^{ea} b^{eb}); the oscillator substitution only applies "
                f"to graph-style ROMs or normal forms up to order 3")
        if (ea, eb) in ((1, 0), (0, 1)) or fb == 0.0:
            continue
        # contribution +Im(lam) * fb * a^ea * b^eb with
        # b = (Re(lam) a - adot) / Im(lam)
        for k in range(eb + 1):
            c = (lam.imag * fb * comb(eb, k)
                 * (lam.real / lam.imag) ** (eb - k)
                 * (-1.0 / lam.imag) ** k)
            key = (ea + eb - k, k)
            coef[key] = coef.get(key, 0.0) + c
    coef = {k: v for k, v in coef.items() if v != 0.0}
    return OscillatorForm(omega=w, xi=xi, coef=coef)

"""Hot numeric kernels: sparse symmetric tensor contractions and polynomial
right-hand-side evaluation.

Every kernel exists twice: a numba ``@njit`` build and a pure-numpy twin.
The active path is chosen at import time by the environment flag
``MANROM_NUMBA`` ("0"/"false" forces the numpy path); when numba is not
installed the numpy path is used silently.  Both builds are importable
under explicit names (``*_numba`` / ``*_numpy``) so they can be benchmarked
against each other — see ``benchmarks/bench_kernels.py``.
"""

import os

import numpy as np

_flag = os.environ.get("MANROM_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

try:
    from numba import njit as _njit

    _have_numba = True
except ImportError:  # pragma: no cover - depends on environment
    _have_numba = False

using_numba = _want_numba and _have_numba


# ----------------------------------------------------------------------
# pure-numpy builds
# ----------------------------------------------------------------------

def quad_contract_numpy(pp, rr, ss, vals, a, b, out):
    """out[p] += G_prs * (a_r b_s + a_s b_r), diagonal counted once."""
    if len(pp) == 0:
        return out
    cross = a[rr] * b[ss] + a[ss] * b[rr]
    diag = rr == ss
    if diag.any():
        cross = np.where(diag, a[rr] * b[rr], cross)
    np.add.at(out, pp, vals * cross)
    return out


def cub_contract_numpy(pp, rr, ss, tt, vals, a, b, c, out):
    """out[p] += H_prst * sum over distinct arrangements of (r,s,t)."""
    if len(pp) == 0:
        return out
    # Sum over all 6 index permutations, then rescale so each *distinct*
    # ordered arrangement of the multiset {r,s,t} is counted exactly once.
    full = (a[rr] * (b[ss] * c[tt] + b[tt] * c[ss])
            + a[ss] * (b[rr] * c[tt] + b[tt] * c[rr])
            + a[tt] * (b[rr] * c[ss] + b[ss] * c[rr]))
    n_eq = (rr == ss).astype(np.int64) + (ss == tt).astype(np.int64)
    # n_eq = 0 -> 6 arrangements, 1 -> 3, 2 -> 1; scale = distinct/6
    scale = np.where(n_eq == 0, 1.0, np.where(n_eq == 1, 0.5, 1.0 / 6.0))
    np.add.at(out, pp, vals * scale * full)
    return out


def poly_eval_numpy(exps, coefs, x):
    """coefs @ monomials(x) for one state vector x (real or complex)."""
    mono = np.prod(x[np.newaxis, :] ** exps, axis=1)
    return coefs @ mono


def poly_eval_batch_numpy(exps, coefs, X):
    """Batch of poly_eval over columns of X (d, nt) -> (m, nt)."""
    mono = np.prod(X[np.newaxis, :, :] ** exps[:, :, np.newaxis], axis=1)
    return coefs @ mono


def poly_jac_numpy(exps, coefs, x):
    """Jacobian d(coefs @ monomials)/dx at one state vector."""
    n_terms, d = exps.shape
    jac = np.zeros((coefs.shape[0], d), dtype=np.result_type(coefs, x))
    for j in range(d):
        ej = exps[:, j]
        hit = ej > 0
        if not hit.any():
            continue
        shifted = exps[hit].copy()
        shifted[:, j] -= 1
        dmono = ej[hit] * np.prod(x[np.newaxis, :] ** shifted, axis=1)
        jac[:, j] = coefs[:, hit] @ dmono
    return jac


# ----------------------------------------------------------------------
# numba builds (compiled lazily, cached on disk)
# ----------------------------------------------------------------------

if _have_numba:

    @_njit(cache=True)
    def quad_contract_numba(pp, rr, ss, vals, a, b, out):
        for k in range(pp.shape[0]):
            r = rr[k]
            s = ss[k]
            if r == s:
                out[pp[k]] += vals[k] * a[r] * b[r]
            else:
                out[pp[k]] += vals[k] * (a[r] * b[s] + a[s] * b[r])
        return out

    @_njit(cache=True)
    def cub_contract_numba(pp, rr, ss, tt, vals, a, b, c, out):
        for k in range(pp.shape[0]):
            r = rr[k]
            s = ss[k]
            t = tt[k]
            v = vals[k]
            if r == s:
                if s == t:
                    out[pp[k]] += v * a[r] * b[r] * c[r]
                else:
                    out[pp[k]] += v * (a[r] * b[r] * c[t]
                                       + a[r] * b[t] * c[r]
                                       + a[t] * b[r] * c[r])
            elif s == t:
                out[pp[k]] += v * (a[r] * b[s] * c[s]
                                   + a[s] * b[r] * c[s]
                                   + a[s] * b[s] * c[r])
            else:
                out[pp[k]] += v * (a[r] * (b[s] * c[t] + b[t] * c[s])
                                   + a[s] * (b[r] * c[t] + b[t] * c[r])
                                   + a[t] * (b[r] * c[s] + b[s] * c[r]))
        return out

    @_njit(cache=True)
    def _poly_mono_numba(exps, x):
        n_terms, d = exps.shape
        mono = np.ones(n_terms, dtype=x.dtype)
        for t in range(n_terms):
            acc = mono[t]
            for j in range(d):
                e = exps[t, j]
                for _ in range(e):
                    acc *= x[j]
            mono[t] = acc
        return mono

    @_njit(cache=True)
    def poly_eval_numba(exps, coefs, x):
        mono = _poly_mono_numba(exps, x)
        return coefs @ mono

    @_njit(cache=True)
    def poly_eval_batch_numba(exps, coefs, X):
        d, nt = X.shape
        n_terms = exps.shape[0]
        mono = np.empty((n_terms, nt), dtype=X.dtype)
        for k in range(nt):
            mono[:, k] = _poly_mono_numba(exps, X[:, k])
        return coefs @ mono

    @_njit(cache=True)
    def poly_jac_numba(exps, coefs, x):
        n_terms, d = exps.shape
        m = coefs.shape[0]
        jac = np.zeros((m, d), dtype=coefs.dtype)
        dmono = np.empty(n_terms, dtype=coefs.dtype)
        for j in range(d):
            for t in range(n_terms):
                e = exps[t, j]
                if e == 0:
                    dmono[t] = 0.0
                    continue
                acc = 1.0 * e
                for jj in range(d):
                    ee = exps[t, jj]
                    if jj == j:
                        ee -= 1
                    for _ in range(ee):
                        acc *= x[jj]
                dmono[t] = acc
            for i in range(m):
                s = 0.0
                for t in range(n_terms):
                    s += coefs[i, t] * dmono[t]
                jac[i, j] += s
        return jac

else:  # pragma: no cover - depends on environment
    quad_contract_numba = None
    cub_contract_numba = None
    poly_eval_numba = None
    poly_eval_batch_numba = None
    poly_jac_numba = None


# active dispatch
if using_numba:
    quad_contract = quad_contract_numba
    cub_contract = cub_contract_numba
    poly_eval = poly_eval_numba
    poly_eval_batch = poly_eval_batch_numba
    poly_jac = poly_jac_numba
else:
    quad_contract = quad_contract_numpy
    cub_contract = cub_contract_numpy
    poly_eval = poly_eval_numpy
    poly_eval_batch = poly_eval_batch_numpy
    poly_jac = poly_jac_numpy


def warm_up():
    """Trigger JIT compilation of all kernels on toy data (no-op for numpy)."""
    pp = np.array([0], dtype=np.int64)
    vals = np.array([1.0])
    a = np.array([1.0 + 0j, 2.0])
    out = np.zeros(1, dtype=np.complex128)
    quad_contract(pp, pp, pp, vals, a, a, out)
    cub_contract(pp, pp, pp, pp, vals, a, a, a, out)
    ar = np.array([1.0, 2.0])
    outr = np.zeros(1)
    quad_contract(pp, pp, pp, vals, ar, ar, outr)
    cub_contract(pp, pp, pp, pp, vals, ar, ar, ar, outr)
    exps = np.array([[1, 1], [2, 0]], dtype=np.int64)
    coefs = np.array([[1.0, 0.5], [0.0, 2.0]])
    x = np.array([0.3, 0.4])
    poly_eval(exps, coefs, x)
    poly_eval_batch(exps, coefs, np.column_stack([x, x]))
    poly_jac(exps, coefs, x)
    poly_eval(exps, coefs.astype(np.complex128), x.astype(np.complex128))
    poly_eval_batch(exps, coefs.astype(np.complex128),
                    np.column_stack([x, x]).astype(np.complex128))

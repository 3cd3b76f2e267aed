"""Multi-index bookkeeping over the doubled master-coordinate alphabet.

A degree-``p`` monomial ``z_{i1} z_{i2} ... z_{ip}`` in the ``2n`` master
coordinates (labels ``0..n-1`` for the modal coordinates, ``n..2n-1`` for
their complex conjugates) is identified with the sorted tuple
``(i1 <= ... <= ip)``.  Everything downstream — enumeration, conjugation,
sub-multiset splits feeding the order-``p`` right-hand sides, and resonance
classification — operates on these canonical tuples.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations, combinations_with_replacement

import numpy as np

STYLES = ("graph", "cnf", "rnf", "frnf")


def enumerate_indices(n2, p):
    """All canonical multi-indices of order ``p``, lexicographic."""
    return list(combinations_with_replacement(range(n2), p))


def n_indices(n2, p):
    return math.comb(n2 + p - 1, p)


def conj_index(I, n):
    """Multi-index of the conjugate monomial (labels swapped across n)."""
    return tuple(sorted((j + n) % (2 * n) for j in I))


def canonical_representative(I, n):
    """(representative, is_conjugate) for conjugate-pair folding."""
    J = conj_index(I, n)
    return (I, False) if I <= J else (J, True)


def index_sigma(I, lam):
    """sigma_I = sum of the master eigenvalues selected by ``I``."""
    return complex(np.sum(np.asarray(lam)[list(I)]))


def exponents(index_list, n2):
    """(len, n2) int64 exponent rows for a list of multi-indices."""
    E = np.zeros((len(index_list), n2), dtype=np.int64)
    for k, I in enumerate(index_list):
        for j in I:
            E[k, j] += 1
    return E


def multiset_diff(I, A):
    """I with the sub-multiset A removed (both canonical tuples)."""
    rem = list(I)
    for a in A:
        rem.remove(a)
    return tuple(rem)


@lru_cache(maxsize=None)
def sub_multisets(I, k):
    """Distinct sub-multisets of size ``k``, sorted."""
    return tuple(sorted(set(combinations(I, k))))


@lru_cache(maxsize=None)
def pair_splits(I):
    """Distinct ordered pairs (A, B) of nonempty multisets with A + B = I."""
    out = []
    for ka in range(1, len(I)):
        for A in sub_multisets(I, ka):
            out.append((A, multiset_diff(I, A)))
    return tuple(out)


@lru_cache(maxsize=None)
def triple_splits(I):
    """Distinct ordered triples (A, B, C), nonempty, with A + B + C = I."""
    out = []
    for ka in range(1, len(I) - 1):
        for A in sub_multisets(I, ka):
            rem = multiset_diff(I, A)
            for kb in range(1, len(rem)):
                for B in sub_multisets(rem, kb):
                    out.append((A, B, multiset_diff(rem, B)))
    return tuple(out)


def net_counts(I, n):
    """Per-mode count difference (occurrences of j minus of its conjugate)."""
    net = [0] * n
    for j in I:
        net[j % n] += 1 if j < n else -1
    return net


def trivial_resonances(I, n):
    """Labels r with sigma_I = lambda_r as an exact eigenvalue identity.

    Decided purely combinatorially: after cancelling conjugate pairs the
    multi-index must reduce to a single label.  Holds at any damping level.
    """
    net = net_counts(I, n)
    nz = [(j, v) for j, v in enumerate(net) if v]
    if len(nz) == 1 and abs(nz[0][1]) == 1:
        j, v = nz[0]
        return [j if v > 0 else j + n]
    return []


def resonance_set(I, lam, n, style, tol_rel=1e-3):
    """Master labels resonant with ``I`` — the borders of its homological
    solve — under the requested parametrisation style.

    graph
        every label, every order (the tangent-space constraint).
    cnf
        trivial resonances plus numeric near-resonances
        ``|Im sigma_I - Im lambda_r| <= tol_rel * |lambda_r|``.
    rnf
        the cnf set closed under conjugation.
    frnf
        single mode only: both labels at odd orders, none at even orders
        (the full oscillator dynamics stays in the normal form).
    """
    n2 = 2 * n
    if style == "graph":
        return tuple(range(n2))
    if style == "frnf":
        if n != 1:
            raise ValueError(
                "frnf is defined for a single master mode; use rnf for "
                "multi-mode reduction")
        return (0, 1) if len(I) % 2 == 1 else ()
    if style not in ("cnf", "rnf"):
        raise ValueError(f"unknown parametrisation style {style!r}")
    hits = set(trivial_resonances(I, n))
    im = index_sigma(I, lam).imag
    for r in range(n2):
        if abs(im - lam[r].imag) <= tol_rel * abs(lam[r]):
            hits.add(r)
    if style == "rnf":
        hits |= {(r + n) % n2 for r in hits}
    return tuple(sorted(hits))


def outer_hits(I, lam, slave_omegas, tol_rel=1e-3):
    """Slave modes whose frequency collides with ``|Im sigma_I|``.

    Any hit is fatal for the reduction: the invariant manifold folds along
    the resonant slave direction and that mode must be promoted to the
    master set.
    """
    im = abs(index_sigma(I, lam).imag)
    return [s for s, om in enumerate(slave_omegas)
            if om > 0 and abs(im - om) <= tol_rel * om]

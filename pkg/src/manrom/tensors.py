"""Second-order mechanical models and their sparse symmetric coupling tensors.

A model is ``M u'' + C u' + K u + G(u,u) + H(u,u,u) = 0`` with symmetric
``M``/``K``, and quadratic/cubic nonlinear forces stored as coordinate lists
of the *distinct* entries of fully symmetric tensors: an entry ``(p, r<=s,
value)`` means the dense symmetric tensor holds ``value`` at every
permutation of ``(r, s)`` in the trailing slots.  Contractions therefore sum
``value * a_i b_j`` over the distinct arrangements of each index multiset.

Disk layout of a model directory (all indices in text files are 1-based):

* ``M.mtx``, ``K.mtx``, optional ``C.mtx`` — Matrix Market;
* ``G.txt`` — lines ``p r s value``; ``H.txt`` — lines ``p r s t value``;
  ``#`` starts a comment, blank lines ignored, duplicate index groups sum.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels


class ModelError(Exception):
    """A model fails a structural requirement (symmetry, singular mass, ...)."""


def _as_csr(A):
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float)))


def _check_symmetric(A, name, rtol):
    d = abs(A - A.T)
    dm = d.max() if d.nnz else 0.0
    scale = abs(A).max() or 1.0
    if dm > rtol * scale:
        raise ModelError(
            f"{name} is not symmetric: max |{name} - {name}^T| = {dm:.3e} "
            f"exceeds {rtol:g} * max|{name}| = {rtol * scale:.3e}")


class _SymCooTensor:
    """Shared plumbing for the order-2 and order-3 coupling tensors."""

    order = None  # trailing index count: 2 for quadratic, 3 for cubic

    def __init__(self, n, idx=None, vals=None):
        self.n = int(n)
        k = self.order
        if idx is None:
            idx = np.zeros((0, k + 1), dtype=np.int64)
            vals = np.zeros(0)
        self.idx = np.asarray(idx, dtype=np.int64).reshape(-1, k + 1)
        self.vals = np.asarray(vals, dtype=float).reshape(-1)
        if self.idx.shape[0] != self.vals.shape[0]:
            raise ValueError("index/value length mismatch")

    @property
    def nnz(self):
        return self.vals.size

    @classmethod
    def from_entries(cls, n, entries):
        """Build from an iterable of ``(p, i, j[, k], value)`` (0-based).

        Trailing indices are canonicalised by sorting; repeated index groups
        accumulate.
        """
        k = cls.order
        rows, vals = [], []
        for ent in entries:
            *ix, v = ent
            if len(ix) != k + 1:
                raise ValueError(f"expected {k + 1} indices, got {len(ix)}")
            p, trail = ix[0], sorted(ix[1:])
            rows.append((p, *trail))
            vals.append(float(v))
        t = cls(n, np.array(rows, dtype=np.int64).reshape(-1, k + 1),
                np.array(vals))
        return t._finalize()

    def _finalize(self):
        """Sort canonically and merge duplicates (dropping exact zeros)."""
        if self.nnz == 0:
            return self
        if self.idx.min() < 0 or self.idx.max() >= self.n:
            raise ValueError("tensor index out of range")
        order = np.lexsort(self.idx.T[::-1])
        idx, vals = self.idx[order], self.vals[order]
        new_group = np.ones(len(vals), dtype=bool)
        new_group[1:] = (idx[1:] != idx[:-1]).any(axis=1)
        group = np.cumsum(new_group) - 1
        merged = np.zeros(group[-1] + 1)
        np.add.at(merged, group, vals)
        keep = merged != 0.0
        self.idx, self.vals = idx[new_group][keep], merged[keep]
        return self

    def dense(self):
        """Full symmetric ndarray (small models / oracles only)."""
        shape = (self.n,) * (self.order + 1)
        A = np.zeros(shape)
        from itertools import permutations
        for row, v in zip(self.idx, self.vals):
            p, trail = row[0], tuple(row[1:])
            for perm in set(permutations(trail)):
                A[(p, *perm)] = v
        return A

    def save_text(self, path):
        k = self.order
        header = "p " + " ".join("rst"[:k]) + " value"
        with open(path, "w") as fh:
            fh.write(f"# {header} (1-based, symmetric in trailing indices)\n")
            fh.write(f"# n = {self.n}\n")
            for row, v in zip(self.idx, self.vals):
                fh.write(" ".join(str(i + 1) for i in row)
                         + f" {float(v)!r}\n")

    @classmethod
    def load_text(cls, path, n=None):
        k = cls.order
        entries = []
        with open(path) as fh:
            for ln, line in enumerate(fh, 1):
                body = line.split("#", 1)[0].strip()
                if not body:
                    if n is None and "n =" in line:
                        n = int(line.split("n =", 1)[1])
                    continue
                parts = body.split()
                if len(parts) != k + 2:
                    raise ValueError(
                        f"{path}:{ln}: expected {k + 2} fields, got "
                        f"{len(parts)}")
                ix = [int(p) - 1 for p in parts[:-1]]
                if min(ix) < 0:
                    raise ValueError(f"{path}:{ln}: indices are 1-based")
                entries.append((*ix, float(parts[-1])))
        if n is None:
            n = 1 + max((max(e[:-1]) for e in entries), default=-1)
        return cls.from_entries(n, entries)


class QuadTensor(_SymCooTensor):
    """Quadratic coupling ``G``: symmetric in its two trailing indices."""

    order = 2

    def contract(self, a, b, out=None):
        """``G(a, b)`` as a length-``n`` vector (bilinear, symmetric)."""
        a = np.asarray(a)
        b = np.asarray(b)
        dt = np.result_type(a, b, float)
        if out is None:
            out = np.zeros(self.n, dtype=dt)
        if self.nnz:
            _kernels.quad_contract(
                np.ascontiguousarray(self.idx[:, 0]),
                np.ascontiguousarray(self.idx[:, 1]),
                np.ascontiguousarray(self.idx[:, 2]),
                self.vals, a.astype(dt, copy=False),
                b.astype(dt, copy=False), out)
        return out

    def contract_one(self, a):
        """Matrix ``B`` with ``B @ b = G(a, b)`` (tangent operator)."""
        B = np.zeros((self.n, self.n), dtype=np.result_type(a, float))
        for (p, r, s), v in zip(self.idx, self.vals):
            B[p, s] += v * a[r]
            if r != s:
                B[p, r] += v * a[s]
        return B


class CubTensor(_SymCooTensor):
    """Cubic coupling ``H``: symmetric in its three trailing indices."""

    order = 3

    def contract(self, a, b, c, out=None):
        """``H(a, b, c)`` as a length-``n`` vector (trilinear, symmetric)."""
        a = np.asarray(a)
        b = np.asarray(b)
        c = np.asarray(c)
        dt = np.result_type(a, b, c, float)
        if out is None:
            out = np.zeros(self.n, dtype=dt)
        if self.nnz:
            _kernels.cub_contract(
                np.ascontiguousarray(self.idx[:, 0]),
                np.ascontiguousarray(self.idx[:, 1]),
                np.ascontiguousarray(self.idx[:, 2]),
                np.ascontiguousarray(self.idx[:, 3]),
                self.vals, a.astype(dt, copy=False),
                b.astype(dt, copy=False), c.astype(dt, copy=False), out)
        return out

    def contract_two(self, a, b):
        """Matrix ``B`` with ``B @ c = H(a, b, c)``."""
        from itertools import permutations
        B = np.zeros((self.n, self.n), dtype=np.result_type(a, b, float))
        for (p, r, s, t), v in zip(self.idx, self.vals):
            for i, j, k in set(permutations((r, s, t))):
                B[p, k] += v * a[i] * b[j]
        return B


@dataclass
class SecondOrderModel:
    """``M u'' + C u' + K u + G(u,u) + H(u,u,u) = 0``."""

    M: sp.csr_matrix
    K: sp.csr_matrix
    C: sp.csr_matrix = None
    G: QuadTensor = None
    H: CubTensor = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.M = _as_csr(self.M)
        self.K = _as_csr(self.K)
        n = self.ndof
        if self.C is None:
            self.C = sp.csr_matrix((n, n))
        else:
            self.C = _as_csr(self.C)
        if self.G is None:
            self.G = QuadTensor(n)
        if self.H is None:
            self.H = CubTensor(n)
        for A, nm in ((self.K, "K"), (self.C, "C")):
            if A.shape != (n, n):
                raise ModelError(f"{nm} has shape {A.shape}, expected {n}x{n}")
        for T, nm in ((self.G, "G"), (self.H, "H")):
            if T.n != n:
                raise ModelError(f"tensor {nm} sized {T.n}, expected {n}")

    @property
    def ndof(self):
        return self.M.shape[0]

    def validate(self, sym_rtol=1e-10):
        """Symmetry of M and K, and nonsingular M; raises ModelError."""
        _check_symmetric(self.M, "M", sym_rtol)
        _check_symmetric(self.K, "K", sym_rtol)
        try:
            lu = spla.splu(self.M.tocsc())
            umin = np.abs(lu.U.diagonal()).min()
        except RuntimeError as exc:
            raise ModelError(f"mass matrix is singular: {exc}") from None
        if umin == 0.0 or not np.isfinite(umin):
            raise ModelError("mass matrix is singular")
        return self

    def without_damping(self):
        """Copy of the model with C dropped (conservative backbone runs)."""
        return SecondOrderModel(self.M, self.K, None, self.G, self.H,
                                name=self.name, meta=dict(self.meta))

    def force_nl(self, u):
        """Nonlinear internal force ``G(u,u) + H(u,u,u)``."""
        f = self.G.contract(u, u)
        return self.H.contract(u, u, u, out=f)

    def tangent_stiffness(self, u):
        """``K + 2 G(u, .) + 3 H(u, u, .)`` as a dense matrix."""
        Kt = self.K.toarray().astype(np.result_type(u, float))
        if self.G.nnz:
            Kt += 2.0 * self.G.contract_one(u)
        if self.H.nnz:
            Kt += 3.0 * self.H.contract_two(u, u)
        return Kt

    def first_order_rhs(self, t, y):
        """RHS of the equivalent first-order ODE (for reference integration).

        State ``y = [u, v]``; M is factorised once and cached.
        """
        n = self.ndof
        u, v = y[:n], y[n:]
        if not hasattr(self, "_m_lu"):
            self._m_lu = spla.splu(self.M.tocsc())
        acc = -(self.K @ u) - (self.C @ v) - self.force_nl(u)
        return np.concatenate([v, self._m_lu.solve(acc)])


MODEL_FILES = {"M": "M.mtx", "K": "K.mtx", "C": "C.mtx",
               "G": "G.txt", "H": "H.txt"}


def save_model(model, outdir):
    """Write a model directory (Matrix Market matrices + text tensors)."""
    os.makedirs(outdir, exist_ok=True)
    scipy.io.mmwrite(os.path.join(outdir, "M.mtx"), model.M.tocoo())
    scipy.io.mmwrite(os.path.join(outdir, "K.mtx"), model.K.tocoo())
    if model.C.nnz:
        scipy.io.mmwrite(os.path.join(outdir, "C.mtx"), model.C.tocoo())
    model.G.save_text(os.path.join(outdir, "G.txt"))
    model.H.save_text(os.path.join(outdir, "H.txt"))
    return outdir


def load_model(path, sym_rtol=1e-10, require=("M", "K")):
    """Load a model directory written by :func:`save_model`.

    Missing required files raise FileNotFoundError (the CLI maps this to
    exit code 2); C/G/H default to zero when their files are absent.
    """
    def fp(key):
        return os.path.join(path, MODEL_FILES[key])

    for key in require:
        if not os.path.exists(fp(key)):
            raise FileNotFoundError(fp(key))
    M = sp.csr_matrix(scipy.io.mmread(fp("M")))
    K = sp.csr_matrix(scipy.io.mmread(fp("K")))
    n = M.shape[0]
    C = (sp.csr_matrix(scipy.io.mmread(fp("C")))
         if os.path.exists(fp("C")) else None)
    G = (QuadTensor.load_text(fp("G"), n)
         if os.path.exists(fp("G")) else None)
    H = (CubTensor.load_text(fp("H"), n)
         if os.path.exists(fp("H")) else None)
    model = SecondOrderModel(M, K, C, G, H, name=os.path.basename(
        os.path.normpath(path)))
    return model.validate(sym_rtol=sym_rtol)

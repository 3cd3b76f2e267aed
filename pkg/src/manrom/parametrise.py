"""Arbitrary-order direct parametrisation of invariant manifolds.

The displacement/velocity fields and the reduced dynamics are expanded as
polynomials in the ``2n`` master coordinates ``z`` (modal coordinates and
their conjugates),

    u = Psi(z) = sum_I Psi_I z^I,   v = Ups(z),   z_s' = f_s(z),

and the coefficients are computed order by order from the homological
equations of the invariance condition.  At each multi-index ``I`` the
resonant master labels ``R`` (style-dependent, see
:func:`manrom.indices.resonance_set`) border the singular operator
``sigma_I^2 M + sigma_I C + K`` so that the system

    | sigma^2 M + sigma C + K     (sigma - conj(lam_r)) M phi_r |  |Psi_I|
    | (sigma - conj(lam_k)) (M phi_k)^T           D             |  | f_R |

with ``D[k, j] = [r_j == r_k] + [r_j == conj(r_k)]`` stays well posed; the
right-hand side collects the nonlinear forces of lower-order coefficients
and the lower-order reduced dynamics fed back through the chain rule.
Conjugate multi-indices are filled by symmetry, so only canonical
representatives are ever solved.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import indices as mi
from ._kernels import poly_eval_numpy, poly_jac_numpy
from ._npz import savez_deterministic
from .spectral import SpectralFrame
from .tensors import ModelError

log = logging.getLogger("manrom")

SCHEMA = "manrom-rom-1"


class ResonanceError(ModelError):
    """A resonance (or near-singular solve) makes the reduction invalid."""


@dataclass
class OrderBlock:
    """All order-``p`` coefficients, one column per canonical multi-index."""

    p: int
    index_list: list
    pos: dict
    Psi: np.ndarray   # (N, nI) complex
    Ups: np.ndarray   # (N, nI) complex
    f: np.ndarray     # (2n, nI) complex: f[s, col] multiplies z^I in z_s'
    resonant: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, p, n2, N):
        ix = mi.enumerate_indices(n2, p)
        nI = len(ix)
        return cls(p=p, index_list=ix, pos={I: k for k, I in enumerate(ix)},
                   Psi=np.zeros((N, nI), dtype=complex),
                   Ups=np.zeros((N, nI), dtype=complex),
                   f=np.zeros((n2, nI), dtype=complex))

    def psi(self, I):
        return self.Psi[:, self.pos[I]]

    def ups(self, I):
        return self.Ups[:, self.pos[I]]

    def f_of(self, I):
        return self.f[:, self.pos[I]]


def assemble_rhs_gh(model, blocks, I):
    """Collected quadratic+cubic force coefficient of ``z^I``.

    Sums ``G(Psi_A, Psi_B)`` over all distinct ordered pairs of nonempty
    sub-multisets with ``A + B = I`` and ``H(Psi_A, Psi_B, Psi_C)`` over all
    distinct ordered triples.
    """
    out = np.zeros(model.ndof, dtype=complex)
    if model.G.nnz:
        for A, B in mi.pair_splits(I):
            model.G.contract(blocks[len(A)].psi(A), blocks[len(B)].psi(B),
                             out=out)
    if model.H.nnz:
        for A, B, C in mi.triple_splits(I):
            model.H.contract(blocks[len(A)].psi(A), blocks[len(B)].psi(B),
                             blocks[len(C)].psi(C), out=out)
    return out


def assemble_rhs_munu(blocks, I, n2):
    """Lower-order dynamics fed back through the chain rule.

    ``mu_I = sum_{B subset I, 2 <= |B| < |I|} sum_s m_s Psi_A f_{s,B}`` with
    ``A = (I - B) + {s}`` and ``m_s`` the multiplicity of ``s`` in ``A``;
    ``nu_I`` is the same sum over the velocity coefficients.
    """
    p = len(I)
    N = blocks[1].Psi.shape[0]
    mu = np.zeros(N, dtype=complex)
    nu = np.zeros(N, dtype=complex)
    for k in range(2, p):
        blk = blocks[k]
        blkA = blocks[p - k + 1]
        for B in mi.sub_multisets(I, k):
            fB = blk.f[:, blk.pos[B]]
            if not fB.any():
                continue
            rem = mi.multiset_diff(I, B)
            for s in range(n2):
                if fB[s] == 0:
                    continue
                A = tuple(sorted(rem + (s,)))
                cA = blkA.pos[A]
                m = A.count(s)
                coef = m * fB[s]
                mu += coef * blkA.Psi[:, cA]
                nu += coef * blkA.Ups[:, cA]
    return mu, nu


def _nearest_eigen_desc(sig, frame):
    """Human-readable nearest eigenvalue to sigma (masters and slaves)."""
    best = None
    for r in range(2 * frame.n):
        d = abs(sig.imag - frame.lam[r].imag)
        lab = f"master mode {frame.masters[r % frame.n] + 1}"
        if best is None or d < best[0]:
            best = (d, lab, frame.lam[r])
    for s, om in zip(frame.slave_ids, frame.slave_omega):
        d = abs(abs(sig.imag) - om)
        if d < best[0]:
            best = (d, f"slave mode {s + 1}", 1j * om)
    return f"{best[1]} (lambda = {best[2]:.6g}, distance {best[0]:.3e})"


def _cond1_estimate(L, lu):
    n = L.shape[0]
    if n < 8:
        return np.linalg.cond(L.toarray(), 1)
    inv = spla.LinearOperator(L.shape, matvec=lu.solve,
                              rmatvec=lambda x: lu.solve(x, trans="H"),
                              dtype=complex)
    return spla.onenormest(L) * spla.onenormest(inv)


def solve_homological(model, frame, I, sig, R, F, mu, cond_limit=1e12):
    """Solve one homological system; returns ``(Psi_I, f_col)``.

    ``R`` is the tuple of resonant master labels (the borders); ``F`` the
    assembled right-hand side and ``mu`` the displacement feedback term.
    """
    N = model.ndof
    n2 = 2 * frame.n
    L = (sig ** 2 * model.M + sig * model.C + model.K).tocsc().astype(complex)
    f_col = np.zeros(n2, dtype=complex)
    if not R:
        try:
            lu = spla.splu(L)
        except RuntimeError as exc:
            raise ResonanceError(
                f"homological operator singular at multi-index {I} "
                f"(sigma = {sig:.6g}); nearest eigenvalue: "
                f"{_nearest_eigen_desc(sig, frame)}. Treat the combination "
                f"as resonant (raise resonance_tol) or promote the mode to "
                f"the master set.") from exc
        cond = _cond1_estimate(L, lu)
        if cond > cond_limit:
            raise ResonanceError(
                f"homological operator ill-conditioned at multi-index {I}: "
                f"cond_1 ~ {cond:.3e} exceeds {cond_limit:.3e} "
                f"(sigma = {sig:.6g}); nearest eigenvalue: "
                f"{_nearest_eigen_desc(sig, frame)}. Treat the combination "
                f"as resonant (raise resonance_tol) or promote the mode to "
                f"the master set.")
        return lu.solve(F), f_col

    m = len(R)
    Bc = np.zeros((N, m), dtype=complex)
    for j, r in enumerate(R):
        Bc[:, j] = (sig - frame.lam_bar(r)) * (model.M @ frame.phi(r))
    D = np.zeros((m, m))
    for k, rk in enumerate(R):
        rk_conj = (rk + frame.n) % n2
        for j, rj in enumerate(R):
            D[k, j] = (1.0 if rj == rk else 0.0) + \
                      (1.0 if rj == rk_conj else 0.0)
    big = sp.bmat([[L, sp.csc_matrix(Bc)],
                   [sp.csc_matrix(Bc.T), sp.csc_matrix(D)]], format="csc")
    rhs = np.concatenate([F, np.array(
        [-(frame.phi(rk) @ (model.M @ mu)) for rk in R])])
    try:
        sol = spla.splu(big).solve(rhs)
    except RuntimeError as exc:
        raise ResonanceError(
            f"bordered homological system singular at multi-index {I} "
            f"(sigma = {sig:.6g}, borders {R}); nearest eigenvalue: "
            f"{_nearest_eigen_desc(sig, frame)}.") from exc
    for j, r in enumerate(R):
        f_col[r] = sol[N + j]
    return sol[:N], f_col


@dataclass
class Parametrisation:
    """The computed manifold: coefficient blocks plus provenance stats."""

    model: object
    frame: SpectralFrame
    style: str
    order: int
    blocks: dict
    solve_counts: dict
    resonance_tol: float
    stats: list = field(default_factory=list)

    # -- coefficient access ------------------------------------------------

    @property
    def n(self):
        return self.frame.n

    def psi(self, I):
        return self.blocks[len(I)].psi(tuple(sorted(I)))

    def ups(self, I):
        return self.blocks[len(I)].ups(tuple(sorted(I)))

    def f_of(self, I):
        return self.blocks[len(I)].f_of(tuple(sorted(I)))

    def arrays(self):
        """(exps, Psi, Ups, f) monomial arrays concatenated over orders."""
        if not hasattr(self, "_arrays"):
            n2 = 2 * self.n
            E, P, U, F = [], [], [], []
            for p in range(1, self.order + 1):
                blk = self.blocks[p]
                E.append(mi.exponents(blk.index_list, n2))
                P.append(blk.Psi)
                U.append(blk.Ups)
                F.append(blk.f)
            self._arrays = (np.vstack(E), np.hstack(P), np.hstack(U),
                            np.hstack(F))
        return self._arrays

    def full_state(self, z):
        """Doubled coordinate vector [z, conj(z)] from master amplitudes."""
        z = np.asarray(z, dtype=complex).reshape(-1)
        if z.size == self.n:
            return np.concatenate([z, np.conj(z)])
        if z.size == 2 * self.n:
            return z
        raise ValueError(f"expected {self.n} master amplitudes")

    def evaluate(self, z):
        """Physical displacement/velocity ``(u, v)`` at master amplitude z."""
        E, P, U, _ = self.arrays()
        zf = self.full_state(z)
        return poly_eval_numpy(E, P, zf), poly_eval_numpy(E, U, zf)

    def reduced_rhs(self, z):
        """z' of the complex reduced dynamics at the doubled state z."""
        E, _, _, F = self.arrays()
        return poly_eval_numpy(E, F, self.full_state(z))

    def invariance_residual(self, z):
        """Residuals of the invariance equations at master amplitude ``z``.

        Returns a dict with absolute and relative force-balance residuals
        (``force``, ``force_rel``) and the tangency mismatch between the
        chained displacement rate and the velocity field (``tangent``,
        ``tangent_rel``).
        """
        E, P, U, F = self.arrays()
        zf = self.full_state(z)
        u = poly_eval_numpy(E, P, zf)
        v = poly_eval_numpy(E, U, zf)
        fz = poly_eval_numpy(E, F, zf)
        JP = poly_jac_numpy(E, P, zf)
        JU = poly_jac_numpy(E, U, zf)
        m = self.model
        r_force = m.M @ (JU @ fz) + m.C @ v + m.K @ u + m.force_nl(u)
        r_tan = JP @ fz - v
        ku = np.linalg.norm(m.K @ u)
        vn = np.linalg.norm(v)
        return {
            "force": float(np.linalg.norm(r_force)),
            "force_rel": float(np.linalg.norm(r_force) / ku) if ku else 0.0,
            "tangent": float(np.linalg.norm(r_tan)),
            "tangent_rel": float(np.linalg.norm(r_tan) / vn) if vn else 0.0,
        }

    # -- persistence ---------------------------------------------------------

    def to_npz(self, path):
        """Serialise coefficients + frame to a versioned ``.npz`` bundle."""
        E, P, U, F = self.arrays()
        order_of = np.concatenate([
            np.full(len(self.blocks[p].index_list), p, dtype=np.int64)
            for p in range(1, self.order + 1)])
        meta = {
            "schema": SCHEMA,
            "style": self.style,
            "order": self.order,
            "masters": [m + 1 for m in self.frame.masters],
            "resonance_tol": self.resonance_tol,
            "solve_counts": {str(k): v for k, v in self.solve_counts.items()},
            "model_name": getattr(self.model, "name", ""),
        }
        savez_deterministic(path, exps=E, Psi=P, Ups=U, f=F,
                            order_of=order_of,
                 Phi=self.frame.Phi, MPhi=self.frame.MPhi,
                 lam=self.frame.lam,
                 omega=self.frame.omega, xi=self.frame.xi,
                 slave_omega=self.frame.slave_omega,
                 slave_ids=np.array(self.frame.slave_ids, dtype=np.int64),
                 masters=np.array(self.frame.masters, dtype=np.int64),
                 meta=np.frombuffer(json.dumps(meta).encode(),
                                    dtype=np.uint8))

    @classmethod
    def from_npz(cls, path, model=None):
        d = np.load(path)
        meta = json.loads(bytes(d["meta"]).decode())
        if meta["schema"] != SCHEMA:
            raise ValueError(f"unsupported ROM schema {meta['schema']!r}")
        frame = SpectralFrame(
            masters=tuple(int(m) for m in d["masters"]),
            omega=d["omega"], xi=d["xi"], Phi=d["Phi"], lam=d["lam"],
            MPhi=d["MPhi"],
            slave_ids=tuple(int(s) for s in d["slave_ids"]),
            slave_omega=d["slave_omega"])
        n2 = 2 * frame.n
        order = int(meta["order"])
        blocks = {}
        E, P, U, F = d["exps"], d["Psi"], d["Ups"], d["f"]
        order_of = d["order_of"]
        for p in range(1, order + 1):
            cols = np.where(order_of == p)[0]
            blk = OrderBlock.empty(p, n2, P.shape[0])
            # columns were stored in enumeration order
            blk.Psi[:, :] = P[:, cols]
            blk.Ups[:, :] = U[:, cols]
            blk.f[:, :] = F[:, cols]
            for k, I in enumerate(blk.index_list):
                assert tuple(np.repeat(np.arange(n2), E[cols[k]])) == I
            blocks[p] = blk
        par = cls(model=model, frame=frame, style=meta["style"], order=order,
                  blocks=blocks,
                  solve_counts={int(k): v
                                for k, v in meta["solve_counts"].items()},
                  resonance_tol=float(meta["resonance_tol"]))
        return par


def parametrise(model, frame, style="rnf", order=3, *, resonance_tol=1e-3,
                cond_limit=1e12, threads=1):
    """Compute the order-``order`` manifold parametrisation.

    Raises :class:`ResonanceError` when an outer resonance with a slave
    mode is detected or a non-resonant solve is near-singular.  With
    ``threads > 1`` the independent homological solves of each order run
    in a thread pool; results are written back in enumeration order, so
    the outcome is identical to the serial run.
    """
    if style not in mi.STYLES:
        raise ValueError(f"style must be one of {mi.STYLES}, got {style!r}")
    if style == "frnf" and frame.n != 1:
        raise ValueError(
            "frnf keeps the full oscillator dynamics of a single mode and "
            "is undefined for multi-mode reduction; use rnf instead")
    if order < 1:
        raise ValueError("order must be >= 1")
    n = frame.n
    n2 = 2 * n
    N = model.ndof

    # order 1: tangent space and linear dynamics
    blk1 = OrderBlock.empty(1, n2, N)
    for r in range(n2):
        blk1.Psi[:, r] = frame.phi(r)
        blk1.Ups[:, r] = frame.lam[r] * frame.phi(r)
        blk1.f[r, r] = frame.lam[r]
    blocks = {1: blk1}
    solve_counts = {}
    stats = []

    for p in range(2, order + 1):
        t0 = time.perf_counter()
        blk = OrderBlock.empty(p, n2, N)
        for I in blk.index_list:
            hits = mi.outer_hits(I, frame.lam, frame.slave_omega,
                                 resonance_tol)
            if hits:
                s = frame.slave_ids[hits[0]]
                om = frame.slave_omega[hits[0]]
                raise ResonanceError(
                    f"outer resonance at order {p}: |Im sigma_{I}| = "
                    f"{abs(mi.index_sigma(I, frame.lam).imag):.6g} collides "
                    f"with slave mode {s + 1} (omega = {om:.6g}). The "
                    f"manifold is not well defined; include mode {s + 1} in "
                    f"the set of master modes.")
        reps = [I for I in blk.index_list
                if not mi.canonical_representative(I, n)[1]]

        def solve_one(I):
            R = mi.resonance_set(I, frame.lam, n, style, resonance_tol)
            sig = mi.index_sigma(I, frame.lam)
            gh = assemble_rhs_gh(model, blocks, I)
            mu, nu = assemble_rhs_munu(blocks, I, n2)
            F = -gh - model.M @ nu - sig * (model.M @ mu) - model.C @ mu
            Psi_I, f_col = solve_homological(model, frame, I, sig, R, F, mu,
                                             cond_limit)
            return I, R, sig, Psi_I, f_col, mu

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(solve_one, reps))
        else:
            results = [solve_one(I) for I in reps]

        for I, R, sig, Psi_I, f_col, mu in results:
            extra = [r for r in R if r not in mi.trivial_resonances(I, n)]
            if extra and style in ("cnf", "rnf"):
                log.info("near-resonant multi-index %s: borders %s", I, R)
            blk.resonant[I] = R
            J = mi.conj_index(I, n)
            if J == I:
                # self-conjugate monomial: project onto the exact symmetry
                conj_f = np.conj(f_col[np.r_[n:n2, 0:n]])
                f_col = 0.5 * (f_col + conj_f)
                Psi_I = 0.5 * (Psi_I + np.conj(Psi_I))
            ups_I = sig * Psi_I + mu
            for r in R:
                ups_I = ups_I + frame.phi(r) * f_col[r]
            if J == I:
                ups_I = 0.5 * (ups_I + np.conj(ups_I))
            c = blk.pos[I]
            blk.Psi[:, c] = Psi_I
            blk.Ups[:, c] = ups_I
            blk.f[:, c] = f_col
            if J != I:
                cj = blk.pos[J]
                blk.Psi[:, cj] = np.conj(Psi_I)
                blk.Ups[:, cj] = np.conj(ups_I)
                blk.f[:, cj] = np.conj(f_col[np.r_[n:n2, 0:n]])
                blk.resonant[J] = tuple(sorted((r + n) % n2 for r in R))
        blocks[p] = blk
        solve_counts[p] = len(reps)
        dt = time.perf_counter() - t0
        stats.append({"order": p, "n_indices": len(blk.index_list),
                      "n_solves": len(reps), "seconds": dt})
        log.info("order %d: %d multi-indices, %d solves, %.3fs",
                 p, len(blk.index_list), len(reps), dt)

    return Parametrisation(model=model, frame=frame, style=style, order=order,
                           blocks=blocks, solve_counts=solve_counts,
                           resonance_tol=resonance_tol, stats=stats)

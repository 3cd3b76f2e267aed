"""Linear modal analysis and the spectral frame of the first-order system.

The second-order model is rewritten as ``B x' = -A x`` with
``B = blockdiag(M, M)`` and ``A = [[C, K], [-M, 0]]``, whose eigenpairs for
an underdamped, classically damped mode ``(omega_j, xi_j, phi_j)`` are

    lambda_j  = -xi_j omega_j + i omega_j sqrt(1 - xi_j^2),
    Y_j = [phi_j lambda_j; phi_j],
    X_j = (lambda_j - conj(lambda_j))^-1 [phi_j; -phi_j conj(lambda_j)],

normalised so that ``X_r^T B Y_s = delta_rs`` and
``X_r^T A Y_s = -lambda_r delta_rs``.  Only the master modes are ever
promoted to this frame; slave modes contribute their frequencies to the
outer-resonance screening.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .tensors import ModelError, SecondOrderModel

log = logging.getLogger("manrom")


def solve_eigen(model, n_modes=None, dense_cutoff=2000):
    """Lowest ``n_modes`` undamped modes of (K, M), mass-normalised.

    Dense ``scipy.linalg.eigh`` below ``dense_cutoff`` DOFs, shift-invert
    Lanczos above.  Mode signs are fixed deterministically: the entry of
    largest magnitude is made positive.
    """
    N = model.ndof
    n_modes = N if n_modes is None else min(int(n_modes), N)
    if N <= dense_cutoff:
        w2, V = scipy.linalg.eigh(model.K.toarray(), model.M.toarray())
        w2, V = w2[:n_modes], V[:, :n_modes]
    else:  # pragma: no cover - large models only
        w2, V = spla.eigsh(model.K.tocsc(), k=n_modes, M=model.M.tocsc(),
                           sigma=0.0, which="LM")
        order = np.argsort(w2)
        w2, V = w2[order], V[:, order]
    omega = np.sqrt(np.maximum(w2, 0.0))
    # mass-normalise and fix signs
    for j in range(V.shape[1]):
        v = V[:, j]
        v /= np.sqrt(v @ (model.M @ v))
        k = int(np.argmax(np.abs(v)))
        if v[k] < 0:
            v *= -1.0
    return omega, V


@dataclass
class SpectralFrame:
    """Master-mode spectral data plus the slave spectrum for screening."""

    masters: tuple            # 0-based mode ids, sorted
    omega: np.ndarray         # (n,) master natural frequencies
    xi: np.ndarray            # (n,) master modal damping ratios
    Phi: np.ndarray           # (N, n) mass-normalised master shapes
    lam: np.ndarray           # (2n,) eigenvalues, lam[j+n] = conj(lam[j])
    MPhi: np.ndarray = None   # (N, n) M @ Phi, cached for projections
    slave_ids: tuple = ()
    slave_omega: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n(self):
        return len(self.masters)

    def phi(self, r):
        """Mode shape for a doubled label (conjugate labels share shapes)."""
        return self.Phi[:, r % self.n]

    def lam_bar(self, r):
        """conj(lambda_r) — the eigenvalue of the conjugate label."""
        return self.lam[(r + self.n) % (2 * self.n)]


def spectral_frame(model, masters, n_compute=None, dense_cutoff=2000,
                   classical_rtol=1e-8, nonclassical="error"):
    """Build the :class:`SpectralFrame` for the chosen master modes.

    Parameters
    ----------
    masters : sequence of int
        0-based mode numbers (ordered by frequency) to keep.
    n_compute : int, optional
        How many modes to compute in total; defaults to
        ``min(N, 10 * len(masters))`` (and always covers the masters).
        The non-master computed modes feed the outer-resonance screen.
    classical_rtol : float
        Off-diagonal tolerance for the modal damping matrix, relative to
        the largest diagonal entry.
    nonclassical : {"error", "warn"}
        What to do when damping is not classical to tolerance.
    """
    masters = tuple(sorted(int(m) for m in masters))
    if len(set(masters)) != len(masters):
        raise ValueError(f"duplicate master mode in {masters}")
    if not masters:
        raise ValueError("at least one master mode is required")
    n = len(masters)
    N = model.ndof
    if masters[-1] >= N:
        raise ValueError(f"master mode {masters[-1] + 1} out of range (N={N})")
    if n_compute is None:
        n_compute = min(N, max(10 * n, masters[-1] + 1))
    n_compute = max(n_compute, masters[-1] + 1)
    omega_all, V = solve_eigen(model, n_compute, dense_cutoff)

    Cm = V.T @ (model.C @ V)
    diag = np.abs(np.diag(Cm))
    off = np.abs(Cm - np.diag(np.diag(Cm))).max() if Cm.size > 1 else 0.0
    scale = diag.max() if diag.size and diag.max() > 0 else 1.0
    if off > classical_rtol * scale:
        msg = (f"damping is not classical: max off-diagonal of the modal "
               f"damping matrix is {off:.3e} vs tolerance "
               f"{classical_rtol * scale:.3e}; the invariant-manifold "
               f"construction assumes modal (classical) damping")
        if nonclassical == "error":
            raise ModelError(msg)
        log.warning(msg)

    om = omega_all[list(masters)]
    if (om <= 0).any():
        raise ModelError("a master mode has zero frequency; only "
                         "oscillatory modes can be parametrised")
    xi = np.array([Cm[m, m] / (2.0 * omega_all[m]) for m in masters])
    if (xi >= 1.0).any():
        raise ModelError(f"master mode overdamped (xi = {xi.max():.4g}); "
                         "the complex-conjugate eigenstructure is lost")
    lam_u = -xi * om + 1j * om * np.sqrt(1.0 - xi ** 2)
    lam = np.concatenate([lam_u, np.conj(lam_u)])
    slave_ids = tuple(j for j in range(n_compute) if j not in masters)
    Phi = V[:, list(masters)]
    return SpectralFrame(masters=masters, omega=om, xi=xi,
                         Phi=Phi, lam=lam, MPhi=model.M @ Phi,
                         slave_ids=slave_ids,
                         slave_omega=omega_all[list(slave_ids)])


def first_order_frame(model, frame):
    """Dense left/right first-order eigenvector blocks (tests/diagnostics).

    Returns ``(B, A, Y, X)`` with ``Y``/``X`` of shape ``(2N, 2n)``; columns
    ``j`` and ``j + n`` hold a conjugate pair.
    """
    N = model.ndof
    n = frame.n
    B = sp.bmat([[model.M, None], [None, model.M]]).tocsr()
    A = sp.bmat([[model.C, model.K], [-model.M, None]]).tocsr()
    Y = np.zeros((2 * N, 2 * n), dtype=complex)
    X = np.zeros((2 * N, 2 * n), dtype=complex)
    for r in range(2 * n):
        lam_r = frame.lam[r]
        lam_bar = frame.lam_bar(r)
        phi = frame.phi(r)
        Y[:N, r] = phi * lam_r
        Y[N:, r] = phi
        X[:N, r] = phi / (lam_r - lam_bar)
        X[N:, r] = -phi * lam_bar / (lam_r - lam_bar)
    return B, A, Y, X


def orthogonality_residuals(model, frame):
    """Max-abs residuals of the spectral identities (acceptance checks).

    Returns a dict with

    * ``"BY"``   : ``X^T B Y - I``
    * ``"AY"``   : ``X^T A Y + diag(lambda)``
    * ``"shift"``: per-master relative residual of
      ``((sigma + lambda_r) M + C) phi_r = (sigma - conj(lambda_r)) M phi_r``
      (sigma-independent; exact for classical damping).
    """
    B, A, Y, X = first_order_frame(model, frame)
    n2 = 2 * frame.n
    r_by = np.abs(X.T @ (B @ Y) - np.eye(n2)).max()
    r_ay = np.abs(X.T @ (A @ Y) + np.diag(frame.lam)).max()
    r_shift = 0.0
    for r in range(n2):
        phi = frame.phi(r)
        res = (frame.lam[r] + frame.lam_bar(r)) * (model.M @ phi) \
            + model.C @ phi
        scale = abs(frame.lam[r]) * np.linalg.norm(model.M @ phi)
        r_shift = max(r_shift, np.linalg.norm(res) / scale)
    return {"BY": float(r_by), "AY": float(r_ay), "shift": float(r_shift)}

"""Analysis of the reduced dynamics: time integration, harmonic-balance
continuation of backbone and forced-response curves, and a multiple-scales
backbone for single-mode oscillator forms.

Harmonic balance works in normalised time ``tau = Omega t``: a periodic
state ``a(tau)`` is expanded per row as ``c_0 + sum_k c_k cos(k tau) + s_k
sin(k tau)`` and the Galerkin residual of ``Omega da/dtau = f(a) + kappa
cos(tau) e`` is driven to zero with semi-analytic Jacobians (pointwise
state Jacobians projected through the FFT quadrature).  The alias-free
sample count for a polynomial vector field of degree ``o`` is
``2 o H + 1``, rounded up to a power of two.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ._kernels import poly_eval_batch, poly_jac
from .tensors import ModelError

log = logging.getLogger("manrom")


class DivergenceError(RuntimeError):
    """A trajectory left the configured amplitude box."""

    def __init__(self, msg, t_blow=None, t=None, states=None):
        super().__init__(msg)
        self.t_blow = t_blow
        self.t = t
        self.states = states


@dataclass
class ReducedODE:
    """Real reduced dynamics ``a' = f(a) + kappa cos(Omega t) e_forced``.

    The forcing is applied to the ``b`` (velocity-like) row of the chosen
    master mode, matching a cosine modal load at that mode.
    """

    rpar: object
    kappa: float = 0.0
    forced_master: int = 0

    def __post_init__(self):
        if self.kappa != 0.0 and self.rpar.style == "cnf":
            raise ValueError(
                "forced response on a cnf ROM is not supported: the complex "
                "normal form averages the phase and cannot carry a cosine "
                "drive; reduce with style 'rnf' or 'graph' instead")
        if not 0 <= self.forced_master < self.rpar.n:
            raise ValueError("forced_master out of range")

    @property
    def dim(self):
        return 2 * self.rpar.n

    @property
    def forced_row(self):
        return self.rpar.n + self.forced_master

    def rhs(self, t, a, Omega=None):
        da = self.rpar.rhs(a)
        if self.kappa != 0.0:
            da = da.copy()
            da[self.forced_row] += self.kappa * math.cos(Omega * t)
        return da


def integrate_reduced(ode, a0, t_end, Omega=None, n_out=400, amp_cap=None,
                      rtol=1e-10, atol=1e-12):
    """Integrate the reduced ODE; raises DivergenceError at the amp cap."""
    if ode.kappa != 0.0 and Omega is None:
        raise ValueError("forced integration needs Omega")
    events = None
    if amp_cap is not None:
        def blow(t, a):
            return np.abs(a).max() - amp_cap
        blow.terminal = True
        blow.direction = 1.0
        events = blow
    sol = solve_ivp(lambda t, a: ode.rhs(t, a, Omega), (0.0, t_end),
                    np.asarray(a0, dtype=float),
                    t_eval=np.linspace(0.0, t_end, n_out),
                    rtol=rtol, atol=atol, method="RK45", events=events,
                    dense_output=False)
    if events is not None and sol.t_events[0].size:
        tb = float(sol.t_events[0][0])
        raise DivergenceError(
            f"reduced trajectory left the amplitude box (|a| > {amp_cap:g}) "
            f"at t = {tb:.6g}", t_blow=tb, t=sol.t, states=sol.y)
    if not sol.success:
        raise DivergenceError("reduced integration failed: " + sol.message,
                              t=sol.t, states=sol.y)
    return sol.t, sol.y


def integrate_full(model, u0, v0, t_end, n_out=400, rtol=1e-10, atol=1e-12):
    """Reference integration of the full second-order model."""
    y0 = np.concatenate([np.asarray(u0, float), np.asarray(v0, float)])
    sol = solve_ivp(model.first_order_rhs, (0.0, t_end), y0,
                    t_eval=np.linspace(0.0, t_end, n_out),
                    rtol=rtol, atol=atol, method="DOP853")
    if not sol.success:
        raise RuntimeError("full-model integration failed: " + sol.message)
    N = model.ndof
    return sol.t, sol.y[:N], sol.y[N:]


# ----------------------------------------------------------------------
# harmonic balance
# ----------------------------------------------------------------------

def _n_samples(order, H):
    return 2 ** max(5, math.ceil(math.log2(2 * order * H + 1)))


def _hbm_ops(H, n_t):
    tau = 2.0 * np.pi * np.arange(n_t) / n_t
    k = np.arange(1, H + 1)
    ckt = np.cos(np.outer(tau, k))
    skt = np.sin(np.outer(tau, k))
    S = np.hstack([np.ones((n_t, 1)), ckt, skt])           # coeffs -> samples
    T = np.vstack([np.full((1, n_t), 1.0 / n_t),
                   2.0 * ckt.T / n_t, 2.0 * skt.T / n_t])  # samples -> coeffs
    W = 2 * H + 1
    D = np.zeros((W, W))
    for kk in range(1, H + 1):
        D[kk, H + kk] = kk
        D[H + kk, kk] = -kk
    return tau, S, T, D


def _hbm_residual(ode, X, Omega, ops):
    tau, S, T, D = ops
    A = X @ S.T
    Fs = poly_eval_batch(ode.rpar.exps, ode.rpar.f, A)
    Fh = Fs @ T.T
    if ode.kappa != 0.0:
        Fh[ode.forced_row, 1] += ode.kappa
    return Omega * (X @ D.T) - Fh, A


def _hbm_jacobian(ode, X, Omega, ops, A):
    tau, S, T, D = ops
    d, W = X.shape
    n_t = S.shape[0]
    Jf = np.empty((n_t, d, d))
    for i in range(n_t):
        Jf[i] = poly_jac(ode.rpar.exps, ode.rpar.f, np.ascontiguousarray(A[:, i]))
    J = np.zeros((d * W, d * W))
    for r in range(d):
        for q in range(d):
            block = -T @ (Jf[:, r, q][:, None] * S)
            if r == q:
                block = block + Omega * D
            J[r * W:(r + 1) * W, q * W:(q + 1) * W] = block
    dR_dOm = (X @ D.T).ravel()
    return J, dR_dOm


@dataclass
class ContinuationCurve:
    """A traced branch: one row per accepted point."""

    kind: str
    H: int
    omega: np.ndarray
    rho: np.ndarray
    amp: np.ndarray
    amp_dof: np.ndarray
    stable: np.ndarray
    X: list
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        cols = [("omega", self.omega), ("rho", self.rho),
                ("amp_modal", self.amp), ("amp_dof", self.amp_dof),
                ("stable", self.stable.astype(int))]
        data = np.column_stack([c[1] for c in cols])
        np.savetxt(path, data, delimiter=",", comments="",
                   header=",".join(c[0] for c in cols), fmt="%.17g")


def _measures(rpar, X, ops, obs_dof=None):
    """(rho, modal amplitude, dof amplitude) of one periodic solution."""
    tau, S, T, D = ops
    A = X @ S.T
    U, _ = rpar.evaluate_many(A)
    MPhi = rpar.frame.MPhi
    q1 = MPhi[:, 0] @ U
    if obs_dof is None:
        obs_dof = int(np.argmax(np.abs(rpar.frame.Phi[:, 0])))
    rho = float(np.hypot(X[0, 1], X[0, 1 + (X.shape[1] - 1) // 2]))
    return rho, float(np.abs(q1).max()), float(np.abs(U[obs_dof]).max())


def hbm_backbone(rpar, rho_grid, H=7, tol=1e-10, max_iter=40, obs_dof=None):
    """Trace the conservative backbone by amplitude stepping.

    The first-harmonic cosine coefficient of ``a_1`` is pinned to each
    value of ``rho_grid`` in turn, the sine coefficient is anchored to zero
    (phase fixing), and the square-plus-two overdetermined system is solved
    by least-squares Newton; it is consistent on the periodic family.
    """
    if np.abs(rpar.frame.xi).max() > 1e-12:
        log.warning("backbone continuation on a damped ROM; the periodic "
                    "family only exists for the conservative system")
    ode = ReducedODE(rpar)
    d = ode.dim
    n = rpar.n
    ops = _hbm_ops(H, _n_samples(rpar.order, H))
    W = 2 * H + 1
    om = float(rpar.frame.omega[0])
    X = np.zeros((d, W))
    X[0, 1] = rho_grid[0]
    X[n, 1 + H] = rho_grid[0]
    pts = []
    for rho in rho_grid:
        X[0, 1] = rho
        Omega = om if not pts else pts[-1][0]
        ok = False
        for _ in range(max_iter):
            R, A = _hbm_residual(ode, X, Omega, ops)
            scale = max(Omega * np.abs(X).max(), 1e-30)
            anchor = X[0, 1 + H]
            pin = X[0, 1] - rho
            rn = max(np.abs(R).max(), abs(anchor) * Omega, abs(pin) * Omega)
            if rn < tol * scale:
                ok = True
                break
            J, dOm = _hbm_jacobian(ode, X, Omega, ops, A)
            m = d * W
            Jbig = np.zeros((m + 2, m + 1))
            Jbig[:m, :m] = J
            Jbig[:m, m] = dOm
            Jbig[m, 1 + H] = 1.0   # phase anchor on sin_1 of a_1
            Jbig[m + 1, 1] = 1.0   # amplitude pin on cos_1 of a_1
            rhs = -np.concatenate([R.ravel(), [anchor, pin]])
            step = np.linalg.lstsq(Jbig, rhs, rcond=None)[0]
            X = X + step[:m].reshape(d, W)
            Omega = Omega + step[m]
        if not ok:
            raise RuntimeError(
                f"backbone Newton failed to converge at rho = {rho:g} "
                f"(H = {H}); refine the rho grid or raise H")
        rho_m, amp_m, amp_d = _measures(rpar, X, ops, obs_dof)
        pts.append((Omega, rho_m, amp_m, amp_d, X.copy()))
    arr = lambda i: np.array([p[i] for p in pts])
    return ContinuationCurve(kind="backbone", H=H, omega=arr(0), rho=arr(1),
                             amp=arr(2), amp_dof=arr(3),
                             stable=np.ones(len(pts), dtype=bool),
                             X=[p[4] for p in pts],
                             meta={"style": rpar.style, "order": rpar.order})


def floquet_multipliers(ode, X, Omega, ops):
    """Monodromy eigenvalues of the periodic solution ``X`` (experimental)."""
    tau, S, T, D = ops
    d = X.shape[0]
    Tper = 2.0 * np.pi / Omega

    def rhs(t, y):
        a = X @ np.concatenate(
            [[1.0],
             np.cos(np.arange(1, (X.shape[1] + 1) // 2) * Omega * t),
             np.sin(np.arange(1, (X.shape[1] + 1) // 2) * Omega * t)])
        J = poly_jac(ode.rpar.exps, ode.rpar.f, a)
        return (J @ y.reshape(d, d)).ravel()

    sol = solve_ivp(rhs, (0.0, Tper), np.eye(d).ravel(), rtol=1e-9,
                    atol=1e-12, method="DOP853")
    M = sol.y[:, -1].reshape(d, d)
    return np.linalg.eigvals(M)


def hbm_frf(ode, Omega_range, H=7, ds0=None, ds_max=None, tol=1e-10,
            max_iter=15, max_points=2000, amp_cap=None, stability=True,
            obs_dof=None):
    """Forced-response curve by pseudo-arclength continuation in Omega.

    Starts from the small-amplitude solution at ``Omega_range[0]`` and
    traces until leaving the Omega interval (or hitting ``max_points`` /
    ``amp_cap``).  Returns a :class:`ContinuationCurve` with Floquet
    stability flags when ``stability`` is on.
    """
    if ode.kappa == 0.0:
        raise ValueError("hbm_frf needs a forced ReducedODE (kappa != 0)")
    rpar = ode.rpar
    d = ode.dim
    ops = _hbm_ops(H, _n_samples(rpar.order, H))
    W = 2 * H + 1
    m = d * W
    om0, om1 = float(Omega_range[0]), float(Omega_range[-1])
    ds0 = ds0 or abs(om1 - om0) / 200.0
    ds_max = ds_max or 10.0 * ds0

    def newton(y, t_hat=None, y_pred=None):
        for it in range(max_iter):
            X = y[:m].reshape(d, W)
            Omega = y[m]
            R, A = _hbm_residual(ode, X, Omega, ops)
            res = R.ravel()
            scale = max(Omega * np.abs(X).max(), abs(ode.kappa), 1e-30)
            extra = 0.0 if t_hat is None else t_hat @ (y - y_pred)
            if max(np.abs(res).max(), abs(extra) * Omega) < tol * scale:
                return y, True
            J, dOm = _hbm_jacobian(ode, X, Omega, ops, A)
            Jbig = np.zeros((m + 1, m + 1))
            Jbig[:m, :m] = J
            Jbig[:m, m] = dOm
            if t_hat is None:
                Jbig[m, m] = 1.0
                rhs = -np.concatenate([res, [0.0]])
            else:
                Jbig[m, :] = t_hat
                rhs = -np.concatenate([res, [extra]])
            try:
                step = np.linalg.solve(Jbig, rhs)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(Jbig, rhs, rcond=None)[0]
            y = y + step
        return y, False

    y = np.zeros(m + 1)
    y[m] = om0
    y, ok = newton(y)
    if not ok:
        raise RuntimeError("FRF start point did not converge")
    pts = []

    def accept(y):
        X = y[:m].reshape(d, W)
        rho, amp_m, amp_d = _measures(rpar, X, ops, obs_dof)
        st = True
        if stability:
            mu = floquet_multipliers(ode, X, y[m], ops)
            st = bool(np.abs(mu).max() <= 1.0 + 1e-6)
        pts.append((y[m], rho, amp_m, amp_d, st, X.copy()))

    accept(y)
    t_hat = np.zeros(m + 1)
    t_hat[m] = 1.0 if om1 > om0 else -1.0
    ds = ds0
    y_prev = y.copy()
    fails = 0
    while len(pts) < max_points:
        y_pred = y_prev + ds * t_hat
        y_new, ok = newton(y_pred.copy(), t_hat, y_pred)
        if not ok:
            ds *= 0.5
            fails += 1
            if fails > 12:
                log.warning("FRF continuation stalled at Omega = %.6g",
                            y_prev[m])
                break
            continue
        fails = 0
        t_new = y_new - y_prev
        nrm = np.linalg.norm(t_new)
        if nrm > 0:
            t_hat = t_new / nrm
        y_prev = y_new
        accept(y_new)
        if amp_cap is not None and pts[-1][2] > amp_cap:
            break
        if not (min(om0, om1) - 1e-12 <= y_new[m] <= max(om0, om1) + 1e-12):
            break
        ds = min(ds * 1.3, ds_max)
    arr = lambda i: np.array([p[i] for p in pts])
    return ContinuationCurve(kind="frf", H=H, omega=arr(0), rho=arr(1),
                             amp=arr(2), amp_dof=arr(3),
                             stable=arr(4).astype(bool),
                             X=[p[5] for p in pts],
                             meta={"style": rpar.style, "order": rpar.order,
                                   "kappa": ode.kappa})


# ----------------------------------------------------------------------
# multiple scales
# ----------------------------------------------------------------------

@dataclass
class MSBackbone:
    """Second-order multiple-scales backbone of a cubic oscillator form.

    For ``a'' + w^2 a + w^2 a (c30 a^2 + c12 (a'/w)^2) = 0`` the amplitude
    expansion of the oscillation frequency is
    ``w(rho) = w (1 + Gamma2 rho^2 + Gamma4 rho^4)`` with

        Gamma2 = (3 c30 + c12) / 8,
        Gamma4 = (-15 c30^2 + 14 c30 c12 + c12^2) / 256.
    """

    omega1: float
    Gamma2: float
    Gamma4: float

    def omega(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.omega1 * (1.0 + self.Gamma2 * rho ** 2
                              + self.Gamma4 * rho ** 4)


def multiple_scales(osc):
    """MS backbone from an :class:`~manrom.realify.OscillatorForm`."""
    c30, c12 = osc.c_norm()
    extra = set(osc.coef) - {(3, 0), (1, 2)}
    if extra:
        raise ModelError(
            f"multiple-scales backbone implemented for cubic oscillator "
            f"forms only; extra terms {sorted(extra)} present")
    g2 = (3.0 * c30 + c12) / 8.0
    g4 = (-15.0 * c30 ** 2 + 14.0 * c30 * c12 + c12 ** 2) / 256.0
    return MSBackbone(omega1=osc.omega, Gamma2=g2, Gamma4=g4)

"""Built-in model recipes: oscillators, a coupled pair, and von Karman
finite-element beams/arches.

Every recipe returns a :class:`~manrom.tensors.SecondOrderModel` whose
quadratic/cubic tensors derive from a potential, so they are fully
symmetric and the energy ``1/2 v'Mv + 1/2 u'Ku + 1/3 u'G(u,u) +
1/4 u'H(u,u,u)`` is conserved by the undamped dynamics (a convenient
oracle for tests).
"""

from __future__ import annotations

import numpy as np

from .tensors import CubTensor, QuadTensor, SecondOrderModel


def duffing(omega0=1.0, gamma=1.0, xi=0.0):
    """Single oscillator ``u'' + 2 xi w0 u' + w0^2 u + gamma u^3 = 0``."""
    H = CubTensor.from_entries(1, [(0, 0, 0, 0, gamma)])
    model = SecondOrderModel(np.array([[1.0]]),
                             np.array([[omega0 ** 2]]),
                             np.array([[2.0 * xi * omega0]]),
                             None, H, name="duffing",
                             meta={"omega0": omega0, "gamma": gamma,
                                   "xi": xi})
    return model.validate()


def coupled2dof(omega=(1.0, 2.5), g=0.5, h=1.0, c=0.3, xi=(0.0, 0.0)):
    """Two coupled oscillators derived from the potential

    ``V = 1/2 w1^2 u1^2 + 1/2 w2^2 u2^2 + g u1^2 u2 + 1/4 h u1^4
    + c u1^3 u2``.

    ``g = 0`` gives an odd-parity (symmetric) system; ``omega = (1, 2)``
    sits on a 1:2 internal resonance between the modes.
    """
    w1, w2 = float(omega[0]), float(omega[1])
    M = np.eye(2)
    K = np.diag([w1 ** 2, w2 ** 2])
    C = np.diag([2.0 * xi[0] * w1, 2.0 * xi[1] * w2])
    gq = [] if g == 0.0 else [(0, 0, 1, g), (1, 0, 0, g)]
    hc = [(0, 0, 0, 0, h)] if h != 0.0 else []
    if c != 0.0:
        hc += [(0, 0, 0, 1, c), (1, 0, 0, 0, c)]
    G = QuadTensor.from_entries(2, gq)
    H = CubTensor.from_entries(2, hc)
    model = SecondOrderModel(M, K, C, G, H, name="coupled2dof",
                             meta={"omega": [w1, w2], "g": g, "h": h,
                                   "c": c})
    return model.validate()


def coupled2dof_folding(omega=(1.0, 2.5), g=2.0, h=1.6, xi=(0.0, 0.0)):
    """Strongly coupled variant whose invariant manifold folds.

    With ``h > 2 g^2 / w2^2`` the potential is confining (bounded
    trajectories) while the strong quadratic coupling bends the manifold
    past a vertical tangent at moderate amplitude — the regime where
    graph-style reduction blows up and normal-form styles stay bounded.
    """
    if h <= 2.0 * g ** 2 / omega[1] ** 2:
        raise ValueError("need h > 2 g^2 / w2^2 for a confining potential")
    return coupled2dof(omega=omega, g=g, h=h, c=0.0, xi=xi)


# ----------------------------------------------------------------------
# 1-D von Karman finite elements
# ----------------------------------------------------------------------

_GAUSS5 = (np.array([-0.906179845938664, -0.538469310105683, 0.0,
                     0.538469310105683, 0.906179845938664]),
           np.array([0.236926885056189, 0.478628670499366,
                     0.568888888888889, 0.478628670499366,
                     0.236926885056189]))


def _hermite(xi, le):
    """Cubic Hermite values/derivatives at xi in [0, 1] on length le."""
    N = np.array([1 - 3 * xi ** 2 + 2 * xi ** 3,
                  le * (xi - 2 * xi ** 2 + xi ** 3),
                  3 * xi ** 2 - 2 * xi ** 3,
                  le * (-xi ** 2 + xi ** 3)])
    dN = np.array([6 * (-xi + xi ** 2),
                   le * (1 - 4 * xi + 3 * xi ** 2),
                   6 * (xi - xi ** 2),
                   le * (-2 * xi + 3 * xi ** 2)]) / le
    ddN = np.array([-6 + 12 * xi,
                    le * (-4 + 6 * xi),
                    6 - 12 * xi,
                    le * (-2 + 6 * xi)]) / le ** 2
    return N, dN, ddN


def _vk_assemble(n_elems, L, EA, EI, rhoA, w0_nodal):
    """Assemble M, K, G, H of a von Karman beam over all DOFs.

    DOF order per node: (u, w, theta).  ``w0_nodal`` holds the initial
    shape as nodal (w0, w0') pairs, interpolated with the same Hermite
    basis as the live deflection.
    """
    n_nodes = n_elems + 1
    ndof = 3 * n_nodes
    le = L / n_elems
    K = np.zeros((ndof, ndof))
    M = np.zeros((ndof, ndof))
    g_entries = []
    h_entries = []
    xtab, wtab = _GAUSS5
    for e in range(n_elems):
        dofs = np.array([3 * e, 3 * e + 1, 3 * e + 2,
                         3 * e + 3, 3 * e + 4, 3 * e + 5])
        w0e = np.array([w0_nodal[0][e], w0_nodal[1][e],
                        w0_nodal[0][e + 1], w0_nodal[1][e + 1]])
        Ke = np.zeros((6, 6))
        Me = np.zeros((6, 6))
        G3 = np.zeros((6, 6, 6))
        H4 = np.zeros((6, 6, 6, 6))
        for xg, wg in zip(xtab, wtab):
            xi = 0.5 * (xg + 1.0)
            wq = wg * 0.5 * le
            N, dN, ddN = _hermite(xi, le)
            Nu = np.zeros(6)
            Nu[0], Nu[3] = 1 - xi, xi
            Ba = np.zeros(6)
            Ba[0], Ba[3] = -1.0 / le, 1.0 / le
            Nw = np.zeros(6)
            Nw[[1, 2, 4, 5]] = N
            Bw = np.zeros(6)
            Bw[[1, 2, 4, 5]] = dN
            Bpp = np.zeros(6)
            Bpp[[1, 2, 4, 5]] = ddN
            w0p = dN @ w0e
            Bt = Ba + w0p * Bw
            Ke += wq * (EA * np.outer(Bt, Bt) + EI * np.outer(Bpp, Bpp))
            Me += wq * rhoA * (np.outer(Nu, Nu) + np.outer(Nw, Nw))
            BtBwBw = np.einsum("p,r,s->prs", Bt, Bw, Bw)
            G3 += wq * (EA / 2.0) * (BtBwBw
                                     + BtBwBw.transpose(1, 0, 2)
                                     + BtBwBw.transpose(2, 1, 0))
            H4 += wq * (EA / 2.0) * np.einsum("p,r,s,t->prst",
                                              Bw, Bw, Bw, Bw)
        K[np.ix_(dofs, dofs)] += Ke
        M[np.ix_(dofs, dofs)] += Me
        for p in range(6):
            for r in range(6):
                for s in range(r, 6):
                    v = G3[p, r, s]
                    if v != 0.0:
                        g_entries.append((dofs[p], dofs[r], dofs[s], v))
                for s in range(r, 6):
                    for t in range(s, 6):
                        v = H4[p, r, s, t]
                        if v != 0.0:
                            h_entries.append((dofs[p], dofs[r], dofs[s],
                                              dofs[t], v))
    return M, K, g_entries, h_entries, ndof


def _vk_reduce(M, K, g_entries, h_entries, ndof, fixed, rhoA=None, Q=None,
               name="vk", meta=None):
    free = np.array([i for i in range(ndof) if i not in fixed])
    remap = -np.ones(ndof, dtype=int)
    remap[free] = np.arange(free.size)
    Mf = M[np.ix_(free, free)]
    Kf = K[np.ix_(free, free)]

    def keep(entries, k):
        out = []
        for ent in entries:
            ix, v = ent[:-1], ent[-1]
            if all(remap[i] >= 0 for i in ix):
                out.append(tuple(remap[i] for i in ix) + (v,))
        return out

    G = QuadTensor.from_entries(free.size, keep(g_entries, 2))
    H = CubTensor.from_entries(free.size, keep(h_entries, 3))
    C = None
    model = SecondOrderModel(Mf, Kf, C, G, H, name=name, meta=meta or {})
    model.meta["free_dofs"] = free.tolist()
    if Q is not None:
        from .spectral import solve_eigen
        om1 = solve_eigen(model, 1)[0][0]
        model.C = (om1 / Q) * model.M
        model.meta["Q"] = Q
    return model.validate()


def vk_beam(n_elems=34, L=1.0, E=210e9, rho=7800.0, b=0.05, h=0.01,
            Q=None):
    """Pinned-pinned straight beam with immovable ends (hardening)."""
    EA, EI, rhoA = E * b * h, E * b * h ** 3 / 12.0, rho * b * h
    w0 = (np.zeros(n_elems + 1), np.zeros(n_elems + 1))
    M, K, ge, he, ndof = _vk_assemble(n_elems, L, EA, EI, rhoA, w0)
    last = 3 * n_elems
    fixed = {0, 1, last, last + 1}    # u, w at both ends
    meta = {"kind": "vk_beam", "thickness": h, "L": L,
            "obs_node_dof": "midspan w"}
    model = _vk_reduce(M, K, ge, he, ndof, fixed, Q=Q, name="vk_beam",
                       meta=meta)
    mid = 3 * (n_elems // 2) + 1
    model.meta["obs_dof"] = int(np.where(np.array(
        model.meta["free_dofs"]) == mid)[0][0])
    return model


def vk_arch(n_elems=34, L=1.0, E=210e9, rho=7800.0, b=0.05, h=0.01,
            rise=3.0, Q=None):
    """Shallow pinned arch, initial shape ``w0 = rise * h * sin(pi x/L)``.

    ``rise`` is in thickness units.  The quadratic curvature coupling makes
    the first mode soften at small amplitude; the quartic membrane term
    takes over and hardens it again at larger amplitude.
    """
    EA, EI, rhoA = E * b * h, E * b * h ** 3 / 12.0, rho * b * h
    x = np.linspace(0.0, L, n_elems + 1)
    amp = rise * h
    w0 = (amp * np.sin(np.pi * x / L),
          amp * np.pi / L * np.cos(np.pi * x / L))
    M, K, ge, he, ndof = _vk_assemble(n_elems, L, EA, EI, rhoA, w0)
    last = 3 * n_elems
    fixed = {0, 1, last, last + 1}
    meta = {"kind": "vk_arch", "thickness": h, "L": L, "rise": rise}
    model = _vk_reduce(M, K, ge, he, ndof, fixed, Q=Q, name="vk_arch",
                       meta=meta)
    mid = 3 * (n_elems // 2) + 1
    model.meta["obs_dof"] = int(np.where(np.array(
        model.meta["free_dofs"]) == mid)[0][0])
    return model


def vk_cantilever(n_elems=20, L=1.0, E=210e9, rho=7800.0, b=0.05, h=0.01,
                  Q=None):
    """Clamped-free straight beam (von Karman surrogate).

    The von Karman kinematics miss the inextensibility effects that
    dominate real cantilevers at large rotations; this model is a
    small-amplitude surrogate and is flagged as such in ``meta``.
    """
    EA, EI, rhoA = E * b * h, E * b * h ** 3 / 12.0, rho * b * h
    w0 = (np.zeros(n_elems + 1), np.zeros(n_elems + 1))
    M, K, ge, he, ndof = _vk_assemble(n_elems, L, EA, EI, rhoA, w0)
    fixed = {0, 1, 2}             # clamp u, w, theta at the root
    meta = {"kind": "vk_cantilever", "thickness": h, "L": L,
            "surrogate": True,
            "note": "von Karman kinematics; valid for moderate rotations "
                    "only"}
    model = _vk_reduce(M, K, ge, he, ndof, fixed, Q=Q, name="vk_cantilever",
                       meta=meta)
    tip = 3 * n_elems + 1
    model.meta["obs_dof"] = int(np.where(np.array(
        model.meta["free_dofs"]) == tip)[0][0])
    return model


RECIPES = {
    "duffing": duffing,
    "coupled2dof": coupled2dof,
    "coupled2dof_folding": coupled2dof_folding,
    "vk_beam": vk_beam,
    "vk_arch": vk_arch,
    "vk_cantilever": vk_cantilever,
}


def build_model(name, params=None):
    """Instantiate a recipe by name with keyword parameters."""
    if name not in RECIPES:
        raise KeyError(
            f"unknown model {name!r}; available: {sorted(RECIPES)}")
    params = dict(params or {})
    if "omega" in params and isinstance(params["omega"], list):
        params["omega"] = tuple(params["omega"])
    if "xi" in params and isinstance(params["xi"], list):
        params["xi"] = tuple(params["xi"])
    return RECIPES[name](**params)

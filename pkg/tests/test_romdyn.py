import logging

import numpy as np
import pytest

import oracles as oc
from manrom import (coupled2dof, duffing, parametrise, realify,
                    spectral_frame)
from manrom.romdyn import (DivergenceError, ReducedODE, hbm_backbone,
                           hbm_frf, integrate_full, integrate_reduced)


def reduced(model, masters, style, order):
    fr = spectral_frame(model, masters=masters)
    return realify(parametrise(model, fr, style=style, order=order))


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------

def test_graph_duffing_rom_is_the_full_oscillator():
    """On a 1-DOF model the graph ROM is the original equation, so the
    reduced trajectory must conserve the exact physical energy."""
    rp = reduced(duffing(gamma=0.8), [0], "graph", 3)
    a0 = np.array([0.6, 0.0])
    t, a = integrate_reduced(ReducedODE(rp), a0, 25.0, n_out=300)
    U, V = rp.evaluate_many(a)
    M, C, K, Gd, Hd = oc.duffing_dense(gamma=0.8)
    E = np.array([oc.total_energy(M, K, Gd, Hd, U[:, k], V[:, k])
                  for k in range(U.shape[1])])
    assert (E.max() - E.min()) / E.mean() < 1e-9


def test_normal_form_rom_nearly_conserves_energy():
    rp = reduced(coupled2dof(), [0], "rnf", 5)
    t, a = integrate_reduced(ReducedODE(rp), [0.2, 0.0],
                             5 * 2 * np.pi, n_out=200)
    U, V = rp.evaluate_many(a)
    M, C, K, Gd, Hd = oc.coupled2dof_dense()
    E = np.array([oc.total_energy(M, K, Gd, Hd, U[:, k], V[:, k])
                  for k in range(U.shape[1])])
    # the order-5 manifold truncation leaks energy only at O(rho^6)
    assert (E.max() - E.min()) / E.mean() < 5e-4


def test_divergence_reports_blowup_time():
    # softening oscillator released outside the potential well
    rp = reduced(duffing(gamma=-1.0), [0], "graph", 3)
    with pytest.raises(DivergenceError) as exc:
        integrate_reduced(ReducedODE(rp), [1.6, 0.0], 50.0, amp_cap=4.0)
    err = exc.value
    assert err.t_blow is not None and 0.0 < err.t_blow < 50.0
    assert err.states is not None
    assert "amplitude box" in str(err)


def test_integrate_full_matches_reference_integrator():
    m = coupled2dof(xi=(0.01, 0.02))
    rng = np.random.default_rng(5)
    u0 = 0.05 * rng.standard_normal(2)
    v0 = 0.05 * rng.standard_normal(2)
    t_eval = np.linspace(0.0, 12.0, 60)
    t, U, V = integrate_full(m, u0, v0, 12.0, n_out=60)
    M, C, K, Gd, Hd = oc.coupled2dof_dense(xi=(0.01, 0.02))
    Ur, Vr = oc.reference_trajectory(M, C, K, Gd, Hd, u0, v0, t_eval)
    assert np.abs(U - Ur).max() < 1e-8
    assert np.abs(V - Vr).max() < 1e-8


def test_forced_integration_needs_omega():
    rp = reduced(duffing(xi=0.01), [0], "rnf", 3)
    ode = ReducedODE(rp, kappa=0.01)
    with pytest.raises(ValueError, match="Omega"):
        integrate_reduced(ode, [0.01, 0.0], 10.0)


def test_forced_cnf_rejected():
    rp = reduced(duffing(xi=0.01), [0], "cnf", 3)
    with pytest.raises(ValueError, match="cnf"):
        ReducedODE(rp, kappa=0.01)


# ---------------------------------------------------------------------------
# harmonic-balance backbone
# ---------------------------------------------------------------------------

class TestBackbone:
    @pytest.fixture(scope="class")
    @staticmethod
    def duffing_curve():
        rp = reduced(duffing(), [0], "rnf", 5)
        grid = [0.05, 0.1, 0.2]
        return rp, grid, hbm_backbone(rp, grid, H=9)

    def test_orbits_satisfy_the_reduced_ode(self, duffing_curve):
        rp, grid, cv = duffing_curve
        for k in range(len(grid)):
            X, Om = cv.X[k], cv.omega[k]
            ts = np.linspace(0.0, 2 * np.pi / Om, 40)
            A = oc.fourier_eval(X, Om, ts)
            dA = oc.fourier_eval_deriv(X, Om, ts)
            res = max(np.abs(dA[:, i] - rp.rhs(A[:, i])).max()
                      for i in range(ts.size))
            assert res < 1e-8 * Om * np.abs(A).max()

    def test_orbits_close_after_one_period(self, duffing_curve):
        rp, grid, cv = duffing_curve
        ode = ReducedODE(rp)
        for k in range(len(grid)):
            a0 = oc.fourier_eval(cv.X[k], cv.omega[k], 0.0).ravel()
            T = 2 * np.pi / cv.omega[k]
            t, a = integrate_reduced(ode, a0, T, n_out=5)
            assert np.abs(a[:, -1] - a0).max() < 1e-9

    def test_hardening_and_small_amplitude_limits(self, duffing_curve):
        rp, grid, cv = duffing_curve
        w0 = rp.frame.omega[0]
        assert np.all(np.diff(cv.omega) > 0)       # gamma > 0 hardens
        assert cv.omega[0] > w0
        # measured first-harmonic amplitude tracks the pinned grid
        assert cv.rho == pytest.approx(grid, rel=1e-6)
        # small-amplitude frequency approaches the MS prediction
        g2, g4 = oc.duffing_ms_gammas(1.0, 1.0)
        w_ms = w0 * (1 + g2 * 0.05 ** 2 + g4 * 0.05 ** 4)
        assert cv.omega[0] == pytest.approx(w_ms, rel=1e-5)

    def test_nonconvergence_is_reported(self):
        rp = reduced(duffing(), [0], "rnf", 3)
        with pytest.raises(RuntimeError, match="refine the rho grid"):
            hbm_backbone(rp, [0.3], H=5, max_iter=1)

    def test_damped_rom_warns(self, caplog):
        # damping so small the periodic family still exists numerically,
        # but large enough to trip the conservative-only warning
        rp = reduced(duffing(xi=1e-11), [0], "rnf", 3)
        with caplog.at_level(logging.WARNING, logger="manrom"):
            hbm_backbone(rp, [0.02], H=5)
        assert any("conservative" in r.message for r in caplog.records)


# ---------------------------------------------------------------------------
# forced response
# ---------------------------------------------------------------------------

class TestFRF:
    @pytest.fixture(scope="class")
    @staticmethod
    def frf():
        rp = reduced(duffing(xi=0.01), [0], "rnf", 3)
        ode = ReducedODE(rp, kappa=0.008)
        return rp, ode, hbm_frf(ode, (0.85, 1.45), H=7)

    def test_curve_spans_the_window_with_a_fold(self, frf):
        rp, ode, cv = frf
        assert cv.omega.min() >= 0.85 - 1e-9
        assert len(cv.omega) > 20
        # strong forcing folds the response: both stabilities present
        assert cv.stable.any() and (~cv.stable).any()
        # out-of-phase upper branch exceeds the linear estimate at resonance
        assert cv.rho.max() > 0.2

    def test_peak_near_backbone(self, frf):
        rp, ode, cv = frf
        k = int(np.argmax(cv.rho))
        rho_pk, om_pk = cv.rho[k], cv.omega[k]
        g2, _ = oc.duffing_ms_gammas(1.0, 1.0)
        # the peak rides the backbone within the damping width
        assert abs(om_pk - (1.0 + g2 * rho_pk ** 2)) < 0.05

    def test_orbit_satisfies_forced_ode(self, frf):
        rp, ode, cv = frf
        k = int(np.argmax(cv.rho))
        X, Om = cv.X[k], cv.omega[k]
        ts = np.linspace(0.0, 2 * np.pi / Om, 30)
        A = oc.fourier_eval(X, Om, ts)
        dA = oc.fourier_eval_deriv(X, Om, ts)
        res = max(np.abs(dA[:, i] - ode.rhs(ts[i], A[:, i], Om)).max()
                  for i in range(ts.size))
        assert res < 1e-7 * Om * np.abs(A).max()

    def test_csv_export_is_deterministic(self, frf, tmp_path):
        _, _, cv = frf
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        cv.to_csv(p1)
        cv.to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()
        data = np.loadtxt(p1, delimiter=",", skiprows=1)
        assert data.shape == (len(cv.omega), 5)
        assert np.array_equal(data[:, 0], cv.omega)
        assert np.array_equal(data[:, 4], cv.stable.astype(float))

    def test_unforced_frf_rejected(self):
        rp = reduced(duffing(xi=0.01), [0], "rnf", 3)
        with pytest.raises(ValueError, match="kappa"):
            hbm_frf(ReducedODE(rp), (0.9, 1.1))

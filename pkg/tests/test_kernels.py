"""The numba kernels and their numpy twins must be numerically
interchangeable: same results on real and complex data, duplicates and
repeated indices included.  When numba is unavailable the twin comparison
degenerates to a self-check of the numpy path."""

import numpy as np
import pytest

from manrom import _kernels as kn

HAVE_TWIN = kn.quad_contract_numba is not None

pairs = [
    ("quad", kn.quad_contract_numpy, kn.quad_contract_numba),
    ("cub", kn.cub_contract_numpy, kn.cub_contract_numba),
    ("eval", kn.poly_eval_numpy, kn.poly_eval_numba),
    ("batch", kn.poly_eval_batch_numpy, kn.poly_eval_batch_numba),
    ("jac", kn.poly_jac_numpy, kn.poly_jac_numba),
]


def rand_idx(rng, n, k, nnz, sorted_trailing=True):
    cols = rng.integers(0, n, size=(nnz, k + 1))
    if sorted_trailing:
        cols[:, 1:] = np.sort(cols[:, 1:], axis=1)
    return [np.ascontiguousarray(cols[:, j]) for j in range(k + 1)]


def rand_vec(rng, n, complex_):
    x = rng.standard_normal(n)
    if complex_:
        x = x + 1j * rng.standard_normal(n)
    return x


@pytest.mark.skipif(not HAVE_TWIN, reason="numba not installed")
@pytest.mark.parametrize("complex_", [False, True], ids=["real", "complex"])
def test_quad_twins_agree(complex_):
    rng = np.random.default_rng(11)
    n = 12
    pp, rr, ss = rand_idx(rng, n, 2, 30)
    vals = rng.standard_normal(30)
    a, b = rand_vec(rng, n, complex_), rand_vec(rng, n, complex_)
    dt = complex if complex_ else float
    out1 = kn.quad_contract_numpy(pp, rr, ss, vals, a, b,
                                  np.zeros(n, dtype=dt))
    out2 = kn.quad_contract_numba(pp, rr, ss, vals, a, b,
                                  np.zeros(n, dtype=dt))
    assert np.allclose(out1, out2, rtol=1e-14, atol=1e-14)


@pytest.mark.skipif(not HAVE_TWIN, reason="numba not installed")
@pytest.mark.parametrize("complex_", [False, True], ids=["real", "complex"])
def test_cub_twins_agree(complex_):
    rng = np.random.default_rng(12)
    n = 10
    pp, rr, ss, tt = rand_idx(rng, n, 3, 40)
    vals = rng.standard_normal(40)
    dt = complex if complex_ else float
    a, b, c = (rand_vec(rng, n, complex_) for _ in range(3))
    out1 = kn.cub_contract_numpy(pp, rr, ss, tt, vals, a, b, c,
                                 np.zeros(n, dtype=dt))
    out2 = kn.cub_contract_numba(pp, rr, ss, tt, vals, a, b, c,
                                 np.zeros(n, dtype=dt))
    assert np.allclose(out1, out2, rtol=1e-14, atol=1e-14)


@pytest.mark.skipif(not HAVE_TWIN, reason="numba not installed")
@pytest.mark.parametrize("complex_", [False, True], ids=["real", "complex"])
def test_poly_twins_agree(complex_):
    rng = np.random.default_rng(13)
    d, n_terms, m = 4, 25, 3
    exps = rng.integers(0, 4, size=(n_terms, d)).astype(np.int64)
    coefs = rng.standard_normal((m, n_terms))
    x = rand_vec(rng, d, complex_)
    if complex_:
        coefs = coefs + 1j * rng.standard_normal((m, n_terms))
    assert np.allclose(kn.poly_eval_numpy(exps, coefs, x),
                       kn.poly_eval_numba(exps, coefs, x),
                       rtol=1e-13, atol=1e-13)
    X = np.column_stack([rand_vec(rng, d, complex_) for _ in range(6)])
    assert np.allclose(kn.poly_eval_batch_numpy(exps, coefs, X),
                       kn.poly_eval_batch_numba(exps, coefs, X),
                       rtol=1e-13, atol=1e-13)
    assert np.allclose(kn.poly_jac_numpy(exps, coefs, x),
                       kn.poly_jac_numba(exps, coefs, x),
                       rtol=1e-13, atol=1e-13)


def test_jacobian_against_finite_differences():
    rng = np.random.default_rng(14)
    d, n_terms, m = 3, 15, 2
    exps = rng.integers(0, 3, size=(n_terms, d)).astype(np.int64)
    coefs = rng.standard_normal((m, n_terms))
    x = rng.standard_normal(d)
    J = kn.poly_jac(exps, coefs, x)
    eps = 1e-7
    for j in range(d):
        dx = np.zeros(d)
        dx[j] = eps
        col = (kn.poly_eval(exps, coefs, x + dx)
               - kn.poly_eval(exps, coefs, x - dx)) / (2 * eps)
        assert np.allclose(J[:, j], col, rtol=1e-6, atol=1e-8)


def test_dispatch_is_consistent():
    if kn.using_numba:
        assert kn.poly_eval is kn.poly_eval_numba
        assert kn.quad_contract is kn.quad_contract_numba
    else:
        assert kn.poly_eval is kn.poly_eval_numpy
        assert kn.quad_contract is kn.quad_contract_numpy


def test_empty_tensors_are_no_ops():
    e = np.zeros(0, dtype=np.int64)
    out = np.full(3, 0.25)
    kn.quad_contract_numpy(e, e, e, np.zeros(0), np.ones(3), np.ones(3), out)
    assert np.all(out == 0.25)


def test_numpy_fallback_builds_the_same_rom(tmp_path):
    """MANROM_NUMBA=0 must leave the public results unchanged (to rounding:
    the two builds order their flops differently)."""
    import os
    import subprocess
    import sys

    script = (
        "import sys\n"
        "from manrom import coupled2dof, parametrise, spectral_frame\n"
        "m = coupled2dof(xi=(0.01, 0.02))\n"
        "fr = spectral_frame(m, masters=[0, 1])\n"
        "par = parametrise(m, fr, style='rnf', order=4)\n"
        "par.to_npz(sys.argv[1])\n"
        "from manrom._kernels import using_numba\n"
        "print('numba', int(using_numba))\n"
    )
    outs = {}
    for flag in ("1", "0"):
        env = dict(os.environ, MANROM_NUMBA=flag)
        p = tmp_path / f"rom_{flag}.npz"
        r = subprocess.run([sys.executable, "-c", script, str(p)],
                           env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs[flag] = (p, r.stdout)
    assert "numba 0" in outs["0"][1]
    a = np.load(outs["1"][0])
    b = np.load(outs["0"][0])
    assert set(a.files) == set(b.files)
    for key in a.files:
        if a[key].dtype.kind in "fc":
            assert np.allclose(a[key], b[key], rtol=1e-12, atol=1e-14), key
        else:
            assert np.array_equal(a[key], b[key]), key

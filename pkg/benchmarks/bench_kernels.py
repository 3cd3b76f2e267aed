"""Benchmark the numba kernels against their pure-numpy twins.

Both builds are always importable from ``manrom._kernels`` regardless of the
``MANROM_NUMBA`` dispatch flag, so this script times them side by side in a
single process.  Workload sizes mirror the library's hot paths: tensor
contractions at finite-element scale (homological right-hand sides) and
polynomial evaluation at reduced-dynamics scale (time stepping and manifold
reconstruction).

Run:  python benchmarks/bench_kernels.py [--repeat 7] [--target-ms 25]
"""

import argparse
import time

import numpy as np

from manrom import _kernels as kn


def rand_tensor_index(rng, order, N, nnz):
    """Trailing-sorted index rows (the storage convention) plus values."""
    idx = np.sort(rng.integers(0, N, size=(nnz, order)), axis=1)
    cols = [np.ascontiguousarray(idx[:, 0])]
    for j in range(1, order):
        cols.append(np.ascontiguousarray(idx[:, j]))
    pp = rng.integers(0, N, size=nnz)
    vals = rng.standard_normal(nnz)
    return [pp.astype(np.int64)] + [c.astype(np.int64) for c in cols], vals


def timeit(fn, args, repeat, target_s):
    """Best-of-``repeat`` seconds per call, auto-scaled inner loop."""
    fn(*args)                       # warm-up (JIT compile / cache touch)
    t0 = time.perf_counter()
    fn(*args)
    once = time.perf_counter() - t0
    inner = max(1, int(target_s / max(once, 1e-9)))
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def build_cases(rng):
    cases = []

    # contraction kernels at FE-model scale, complex state (homological RHS)
    N, nnz_q, nnz_c = 300, 6000, 24000
    (pq, rq, sq), vq = rand_tensor_index(rng, 2, N, nnz_q)
    (pc, rc, sc, tc), vc = rand_tensor_index(rng, 3, N, nnz_c)
    za = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    zb = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    zc = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    out = np.zeros(N, dtype=np.complex128)
    cases.append((f"quad_contract  N={N} nnz={nnz_q} complex",
                  kn.quad_contract_numpy, kn.quad_contract_numba,
                  (pq, rq, sq, vq, za, zb, out)))
    cases.append((f"cub_contract   N={N} nnz={nnz_c} complex",
                  kn.cub_contract_numpy, kn.cub_contract_numba,
                  (pc, rc, sc, tc, vc, za, zb, zc, out)))

    # the same kernels on real data (full-model time integration)
    ra, rb, rc2 = (rng.standard_normal(N) for _ in range(3))
    outr = np.zeros(N)
    cases.append((f"quad_contract  N={N} nnz={nnz_q} real",
                  kn.quad_contract_numpy, kn.quad_contract_numba,
                  (pq, rq, sq, vq, ra, rb, outr)))
    cases.append((f"cub_contract   N={N} nnz={nnz_c} real",
                  kn.cub_contract_numpy, kn.cub_contract_numba,
                  (pc, rc, sc, tc, vc, ra, rb, rc2, outr)))

    # polynomial kernels at reduced-dynamics scale: 2 masters, order 7
    d, m = 4, 120                       # doubled coords, monomial count
    exps = rng.integers(0, 4, size=(m, d)).astype(np.int64)
    coefs = rng.standard_normal((d, m))
    x = 0.3 * rng.standard_normal(d)
    cases.append((f"poly_eval      d={d} terms={m}",
                  kn.poly_eval_numpy, kn.poly_eval_numba,
                  (exps, coefs, x)))
    X = 0.3 * rng.standard_normal((d, 400))
    cases.append((f"poly_eval_batch d={d} terms={m} nt=400",
                  kn.poly_eval_batch_numpy, kn.poly_eval_batch_numba,
                  (exps, coefs, X)))
    cases.append((f"poly_jac       d={d} terms={m}",
                  kn.poly_jac_numpy, kn.poly_jac_numba,
                  (exps, coefs, x)))

    # reconstruction-sized evaluation: many output rows (physical dofs)
    coefs_big = rng.standard_normal((300, m))
    cases.append((f"poly_eval_batch rows=300 nt=400",
                  kn.poly_eval_batch_numpy, kn.poly_eval_batch_numba,
                  (exps, coefs_big, X)))
    return cases


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7,
                    help="timing repetitions (best is reported)")
    ap.add_argument("--target-ms", type=float, default=25.0,
                    help="target wall time per measurement")
    args = ap.parse_args()

    have_numba = kn.quad_contract_numba is not None
    print(f"active dispatch: {'numba' if kn.using_numba else 'numpy'} "
          f"(MANROM_NUMBA flag); numba available: {have_numba}")
    if not have_numba:
        print("numba is not installed — timing the numpy build only.\n")

    rng = np.random.default_rng(7)
    header = (f"{'kernel / workload':38s} {'numpy':>10s} {'numba':>10s} "
              f"{'speedup':>8s}")
    print(header)
    print("-" * len(header))
    for name, f_np, f_nb, fargs in build_cases(rng):
        t_np = timeit(f_np, fargs, args.repeat, args.target_ms * 1e-3)
        if have_numba:
            t_nb = timeit(f_nb, fargs, args.repeat, args.target_ms * 1e-3)
            print(f"{name:38s} {t_np * 1e6:8.1f}us {t_nb * 1e6:8.1f}us "
                  f"{t_np / t_nb:7.1f}x")
        else:
            print(f"{name:38s} {t_np * 1e6:8.1f}us {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()

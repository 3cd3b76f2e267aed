import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as oc
from manrom import ModelError, QuadTensor, CubTensor, SecondOrderModel, \
    load_model, save_model
from manrom.tensors import MODEL_FILES


def rand_entries(rng, N, k, nnz):
    """Random canonical entries (i, sorted trailing indices, value)."""
    out = []
    for _ in range(nnz):
        i = int(rng.integers(N))
        rest = tuple(sorted(rng.integers(N, size=k)))
        out.append((i, *rest, rng.standard_normal()))
    return out


class TestQuadTensor:
    def test_duplicate_entries_accumulate(self):
        T = QuadTensor.from_entries(2, [(0, 0, 1, 2.0), (0, 1, 0, 0.5)])
        # both address the same canonical slot (0 | 0,1)
        assert T.nnz == 1
        D = T.dense()
        assert D[0, 0, 1] == pytest.approx(2.5)
        assert D[0, 1, 0] == pytest.approx(2.5)

    def test_contract_matches_dense_einsum(self):
        rng = np.random.default_rng(3)
        T = QuadTensor.from_entries(4, rand_entries(rng, 4, 2, 12))
        D = T.dense()
        for _ in range(10):
            a = rng.standard_normal(4)
            b = rng.standard_normal(4)
            assert np.allclose(T.contract(a, b), oc.quad_force(D, a, b))

    def test_contract_complex(self):
        rng = np.random.default_rng(4)
        T = QuadTensor.from_entries(3, rand_entries(rng, 3, 2, 8))
        D = T.dense()
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        b = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert np.allclose(T.contract(a, b), oc.quad_force(D, a, b))

    def test_contract_is_symmetric_bilinear(self):
        rng = np.random.default_rng(5)
        T = QuadTensor.from_entries(3, rand_entries(rng, 3, 2, 6))
        a, b = rng.standard_normal((2, 3))
        assert np.allclose(T.contract(a, b), T.contract(b, a))
        # contract_one gives the tangent operator: B(a) @ b == G(a, b)
        assert np.allclose(T.contract_one(a) @ b, T.contract(a, b))

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2),
                              st.integers(0, 2),
                              st.floats(-5, 5, allow_nan=False)),
                    min_size=1, max_size=10))
    @settings(max_examples=40, deadline=None)
    def test_dense_always_symmetric(self, raw):
        entries = [(i, *sorted((r, s)), v) for i, r, s, v in raw]
        D = QuadTensor.from_entries(3, entries).dense()
        assert np.allclose(D, np.swapaxes(D, 1, 2))


class TestCubTensor:
    def test_contract_matches_dense_einsum(self):
        rng = np.random.default_rng(6)
        T = CubTensor.from_entries(4, rand_entries(rng, 4, 3, 15))
        D = T.dense()
        for _ in range(10):
            a, b, c = rng.standard_normal((3, 4))
            assert np.allclose(T.contract(a, b, c), oc.cub_force(D, a, b, c))

    def test_contract_two_jacobian_contraction(self):
        # contract_two(a, b)[p, k] must equal sum_t D[p, :, :, t]-style
        # two-vector contraction: d/du_k of cubic force at u, over 3 slots.
        rng = np.random.default_rng(7)
        T = CubTensor.from_entries(3, rand_entries(rng, 3, 3, 10))
        D = T.dense()
        u = rng.standard_normal(3)
        B = T.contract_two(u, u)
        eps = 1e-7
        for k in range(3):
            du = np.zeros(3)
            du[k] = eps
            fd = (oc.cub_force(D, u + du, u + du, u + du)
                  - oc.cub_force(D, u - du, u - du, u - du)) / (2 * eps)
            assert np.allclose(3.0 * B[:, k], fd, atol=1e-5)


class TestTextIO:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(8)
        T = CubTensor.from_entries(5, rand_entries(rng, 5, 3, 20))
        p = tmp_path / "H.txt"
        T.save_text(p)
        T2 = CubTensor.load_text(p)
        assert T2.n == 5
        assert np.array_equal(T.idx, T2.idx)
        assert np.array_equal(T.vals, T2.vals)  # exact, via repr round-trip

    def test_one_based_file_indices(self, tmp_path):
        T = QuadTensor.from_entries(2, [(0, 0, 1, 1.5)])
        p = tmp_path / "G.txt"
        T.save_text(p)
        body = [ln for ln in p.read_text().splitlines()
                if ln and not ln.startswith("#")]
        assert body[0].split()[:3] == ["1", "1", "2"]


class TestSecondOrderModel:
    def test_validate_rejects_asymmetric_stiffness(self):
        K = np.array([[1.0, 0.3], [0.0, 4.0]])
        m = SecondOrderModel(M=np.eye(2), K=K)
        with pytest.raises(ModelError):
            m.validate()

    def test_force_and_tangent_consistency(self):
        rng = np.random.default_rng(9)
        M, C, K, Gd, Hd = oc.coupled2dof_dense()
        m = SecondOrderModel(
            M=M, K=K, C=C,
            G=QuadTensor.from_entries(2, [(0, 0, 1, 0.5), (1, 0, 0, 0.5)]),
            H=CubTensor.from_entries(2, [(0, 0, 0, 0, 1.0),
                                         (0, 0, 0, 1, 0.3),
                                         (1, 0, 0, 0, 0.3)]))
        u = rng.standard_normal(2) * 0.3
        f0 = K @ u + oc.quad_force(Gd, u, u) + oc.cub_force(Hd, u, u, u)
        assert np.allclose(m.K @ u + m.force_nl(u), f0)
        Kt = m.tangent_stiffness(u)
        eps = 1e-7
        for k in range(2):
            du = np.zeros(2)
            du[k] = eps
            fd = (m.K @ (u + du) + m.force_nl(u + du)
                  - m.K @ (u - du) - m.force_nl(u - du)) / (2 * eps)
            assert np.allclose(Kt[:, k], fd, atol=1e-5)

    def test_first_order_rhs(self):
        m = SecondOrderModel(M=np.diag([2.0, 1.0]), K=np.diag([8.0, 3.0]),
                             C=np.diag([0.1, 0.2]))
        y = np.array([0.1, -0.2, 0.5, 0.25])
        dy = m.first_order_rhs(0.0, y)
        u, v = y[:2], y[2:]
        acc = np.linalg.solve(m.M.toarray(), -(m.K @ u + m.C @ v))
        assert np.allclose(dy, np.concatenate([v, acc]))


class TestModelIO:
    def test_save_load_roundtrip(self, tmp_path):
        import manrom
        m = manrom.coupled2dof(xi=(0.01, 0.02))
        save_model(m, tmp_path)
        m2 = load_model(tmp_path)
        assert np.allclose(m2.M.toarray(), m.M.toarray())
        assert np.allclose(m2.K.toarray(), m.K.toarray())
        assert np.allclose(m2.C.toarray(), m.C.toarray())
        assert np.allclose(m2.G.dense(), m.G.dense())
        assert np.allclose(m2.H.dense(), m.H.dense())

    def test_missing_required_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path)

    def test_model_files_manifest_names(self):
        assert set(MODEL_FILES) >= {"M", "K", "C", "G", "H"}

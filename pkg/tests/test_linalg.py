import numpy as np
import pytest
import scipy.sparse as sp

from sawfeti.assembly import assemble_electrode, assemble_piezo
from sawfeti.geometry import GeometrySpec, build_unit_cell
from sawfeti.linalg import (
    IllPosedSylvesterError,
    SingularMatrixError,
    dense_solve,
    frobenius_norm,
    is_complex_symmetric,
    sparse_factorize,
    sylvester_generalized_solve,
)

from conftest import synthetic_electrode, synthetic_substrate, tiny_geometry


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestFrobeniusNorm:
    def test_identity(self):
        assert frobenius_norm(np.eye(2)) == pytest.approx(np.sqrt(2), rel=1e-15)

    def test_zero(self):
        assert frobenius_norm(np.zeros((3, 4))) == 0.0

    def test_complex_row(self):
        # |3i|^2 + |4|^2 = 25: the conjugate-transpose definition
        assert frobenius_norm(np.array([[3j, 4.0]])) == pytest.approx(5.0, rel=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_transpose_invariance(self, seed):
        rng = np.random.default_rng(seed)
        a = crandn(rng, 7, 4)
        assert frobenius_norm(a) == pytest.approx(frobenius_norm(a.T), rel=1e-14)


class TestDenseSolve:
    def test_identity(self):
        rng = np.random.default_rng(0)
        b = crandn(rng, 4, 3)
        assert np.allclose(dense_solve(np.eye(4), b), b)

    def test_diagonal(self):
        x = dense_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
        assert np.allclose(x, [1.0, 1.0])

    @pytest.mark.parametrize("seed", range(3))
    def test_residual(self, seed):
        rng = np.random.default_rng(seed)
        a = crandn(rng, 5, 5)
        b = crandn(rng, 5, 2)
        x = dense_solve(a, b)
        assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) <= 1e-12

    def test_singular_reports_pivot(self):
        a = np.diag([1.0, 0.0, 2.0])
        with pytest.raises(SingularMatrixError) as exc:
            dense_solve(a, np.ones(3))
        assert exc.value.pivot_index is not None

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        a = crandn(rng, 6, 6)
        b = crandn(rng, 6)
        assert np.array_equal(dense_solve(a, b), dense_solve(a, b))


class TestSparseFactorize:
    def test_diagonal_is_entrywise_division(self):
        d = np.array([2.0, 4.0, 8.0], dtype=complex)
        handle = sparse_factorize(sp.diags(d).tocsc())
        b = np.array([2.0, 4.0, 8.0], dtype=complex)
        assert np.allclose(handle.solve(b), np.ones(3))

    def test_electrode_operator_nonsingular_at_positive_frequency(self):
        geom = tiny_geometry(electrode_nodes=(3, 2, 3), substrate_nodes=(5, 2, 5))
        _, elec = build_unit_cell(geom)
        system = assemble_electrode(elec, synthetic_electrode(), omega=2.0)
        handle = sparse_factorize(system.K)  # must not raise
        b = np.ones(system.n, dtype=complex)
        x = handle.solve(b)
        assert np.linalg.norm(system.K @ x - b) / np.linalg.norm(b) <= 1e-10

    def test_residual_on_assembled_substrate_operator(self):
        geom = tiny_geometry(substrate_nodes=(3, 3, 3), electrode_nodes=(2, 3, 2),
                             electrode_width=0.5, orders=(1, 1, 1), pml_nodes=2)
        cell, _ = build_unit_cell(geom)
        system = assemble_piezo(cell, synthetic_substrate(), omega=2.0)
        rng = np.random.default_rng(0)
        b = crandn(rng, system.n)
        x = system.solve(b)
        assert np.linalg.norm(system.K @ x - b) / np.linalg.norm(b) <= 1e-10

    def test_singular_diagonal_reports_pivot(self):
        a = sp.diags([1.0, 2.0, 0.0, 3.0]).tocsc()
        with pytest.raises(SingularMatrixError) as exc:
            sparse_factorize(a)
        assert exc.value.pivot_index == 2

    @pytest.mark.parametrize("cond", [1e2, 1e5, 1e8])
    def test_round_trip_under_conditioning(self, cond):
        rng = np.random.default_rng(int(np.log10(cond)))
        n = 40
        scales = np.logspace(0.0, np.log10(cond), n)
        a = sp.csc_matrix(np.diag(scales) + 0.1 * crandn(rng, n, n))
        handle = sparse_factorize(a)
        b = crandn(rng, n)
        x = handle.solve(b)
        assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) <= 1e-10

    def test_handle_counts_solves(self):
        handle = sparse_factorize(sp.identity(3, format="csc", dtype=complex))
        handle.solve(np.ones(3))
        handle.solve(np.ones((3, 2)))
        assert handle.n_solves == 2


def kronecker_oracle(a1, a2, y, c):
    """Vectorized solve of A1 E + A2 E Y = C (test-only, n*m <= 1024)."""
    n, m = c.shape
    assert n * m <= 1024
    big = np.kron(np.eye(m), a1) + np.kron(y.T, a2)
    return np.linalg.solve(big, c.reshape(n * m, order="F")).reshape((n, m), order="F")


class TestSylvester:
    def test_degenerates_to_linear_solve(self):
        rng = np.random.default_rng(1)
        a1 = crandn(rng, 3, 3)
        c = crandn(rng, 3, 2)
        e = sylvester_generalized_solve(a1, np.zeros((3, 3)), crandn(rng, 2, 2), c)
        assert np.allclose(e, np.linalg.solve(a1, c), atol=1e-12)

    def test_scalar(self):
        a1, a2, y, c = 2.0, 3.0, 4.0, 28.0
        e = sylvester_generalized_solve([[a1]], [[a2]], [[y]], [[c]])
        assert e[0, 0] == pytest.approx(c / (a1 + a2 * y), rel=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_against_kronecker_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a1, a2 = crandn(rng, 4, 4), crandn(rng, 4, 4)
        y, c = crandn(rng, 4, 4), crandn(rng, 4, 4)
        e = sylvester_generalized_solve(a1, a2, y, c)
        ref = kronecker_oracle(a1, a2, y, c)
        assert np.linalg.norm(e - ref) / np.linalg.norm(ref) <= 1e-10

    @pytest.mark.parametrize("n,m", [(2, 3), (8, 8), (16, 5), (32, 32)])
    def test_residual_up_to_32(self, n, m):
        rng = np.random.default_rng(n * 100 + m)
        a1, a2 = crandn(rng, n, n), crandn(rng, n, n)
        y, c = crandn(rng, m, m), crandn(rng, n, m)
        e = sylvester_generalized_solve(a1, a2, y, c)
        res = np.linalg.norm(a1 @ e + a2 @ e @ y - c) / np.linalg.norm(c)
        assert res <= 1e-10

    def test_ill_posed_pairing(self):
        # coefficient a1 + y*a2 = -2 + 2*1 vanishes
        with pytest.raises(IllPosedSylvesterError):
            sylvester_generalized_solve([[-2.0]], [[1.0]], [[2.0]], [[1.0]])

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        args = (crandn(rng, 5, 5), crandn(rng, 5, 5), crandn(rng, 3, 3), crandn(rng, 5, 3))
        assert np.array_equal(
            sylvester_generalized_solve(*args), sylvester_generalized_solve(*args)
        )


def test_is_complex_symmetric():
    a = np.array([[1.0, 2j], [2j, 3.0]])
    assert is_complex_symmetric(a)
    assert not is_complex_symmetric(np.array([[1.0, 2j], [-2j, 3.0]]))
    assert is_complex_symmetric(sp.csr_matrix(a))

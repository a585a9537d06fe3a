import numpy as np
import pytest

from openqb.hilbert import (
    DensityOp,
    DimensionMismatchError,
    HilbertError,
    LinearOp,
    PureState,
    SpaceLayout,
    embed,
    expectation,
    kron_compose,
    partial_trace,
    purity,
    trace_distance,
)
from openqb.models import destroy, sigma_x, sigma_z

from conftest import random_density, random_pure

I2 = np.eye(2, dtype=complex)


def basis(d, i):
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


class TestSpaceLayout:
    def test_total_dim(self):
        assert SpaceLayout((2, 2, 21)).total_dim == 84

    def test_rejects_empty_and_nonpositive(self):
        with pytest.raises(HilbertError):
            SpaceLayout(())
        with pytest.raises(HilbertError):
            SpaceLayout((2, 0))


class TestKronCompose:
    def test_identity_factors(self):
        layout = SpaceLayout((2, 2))
        out = kron_compose([I2, I2], layout)
        np.testing.assert_array_equal(out.matrix, np.eye(4))

    def test_sigma_z_on_first_factor(self):
        # |down,up> is an eigenstate of sigma_z x I with eigenvalue -1
        layout = SpaceLayout((2, 2))
        op = kron_compose([sigma_z(), I2], layout)
        psi = np.kron(basis(2, 0), basis(2, 1))
        np.testing.assert_allclose(op.matrix @ psi, -psi, atol=1e-15)

    def test_sigma_x_squared_is_identity(self):
        # oracle: direct 4x4 matrix multiplication
        layout = SpaceLayout((2, 2))
        op = kron_compose([sigma_x(), sigma_x()], layout).matrix
        np.testing.assert_allclose(op @ op, np.eye(4), atol=1e-14)

    def test_dimension_mismatch_names_subsystem(self):
        layout = SpaceLayout((2, 3))
        with pytest.raises(DimensionMismatchError, match="subsystem 1"):
            kron_compose([I2, I2], layout)

    def test_associativity(self, rng):
        # composing pairwise vs all-at-once agrees entrywise
        dims = (2, 3, 2)
        layout = SpaceLayout(dims)
        mats = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for d in dims]
        all_at_once = kron_compose(mats, layout).matrix
        pairwise = np.kron(np.kron(mats[0], mats[1]), mats[2])
        np.testing.assert_allclose(all_at_once, pairwise, atol=1e-12)


class TestEmbed:
    def test_sigma_z_up_up(self):
        layout = SpaceLayout((2, 2))
        op = embed(sigma_z(), 0, layout)
        psi = np.kron(basis(2, 1), basis(2, 1))
        np.testing.assert_allclose(op.matrix @ psi, psi, atol=1e-15)

    def test_identity_embeds_to_identity(self):
        layout = SpaceLayout((2, 3, 2))
        out = embed(np.eye(3, dtype=complex), 1, layout)
        np.testing.assert_array_equal(out.matrix, np.eye(12))

    def test_number_operator_spectrum(self):
        # oracle: explicit diagonalization of the embedded operator
        layout = SpaceLayout((2, 2, 3))
        a = destroy(3)
        op = embed(a.conj().T @ a, 2, layout, hermitian=True)
        eigs = np.sort(np.linalg.eigvalsh(op.matrix))
        expected = np.sort(np.tile([0.0, 1.0, 2.0], 4))
        np.testing.assert_allclose(eigs, expected, atol=1e-12)

    def test_index_and_dimension_errors(self):
        layout = SpaceLayout((2, 3))
        with pytest.raises(HilbertError):
            embed(I2, 5, layout)
        with pytest.raises(DimensionMismatchError):
            embed(I2, 1, layout)


class TestPartialTrace:
    def test_product_state_keeps_battery(self):
        layout = SpaceLayout((2, 2))
        psi = PureState(np.kron(basis(2, 0), basis(2, 1)), layout)
        red = partial_trace(psi, 0)
        np.testing.assert_allclose(red.matrix, np.outer(basis(2, 0), basis(2, 0)), atol=1e-15)

    def test_bell_state_is_maximally_mixed(self):
        layout = SpaceLayout((2, 2))
        bell = PureState((np.kron(basis(2, 0), basis(2, 0))
                          + np.kron(basis(2, 1), basis(2, 1))) / np.sqrt(2), layout)
        for keep in (0, 1):
            red = partial_trace(bell, keep)
            np.testing.assert_allclose(red.matrix, np.eye(2) / 2, atol=1e-15)

    def test_schmidt_spectrum_matches_svd(self, rng):
        # oracle: singular values of the reshaped amplitude matrix
        layout = SpaceLayout((3, 4))
        psi = random_pure(rng, 12)
        red = partial_trace(PureState(psi, layout), 0)
        eigs = np.sort(np.linalg.eigvalsh(red.matrix))[::-1]
        svals = np.linalg.svd(psi.reshape(3, 4), compute_uv=False)
        np.testing.assert_allclose(eigs, np.sort(svals**2)[::-1], atol=1e-12)

    def test_density_matrix_input(self, rng):
        layout = SpaceLayout((2, 3))
        rho = DensityOp(random_density(rng, 6), layout)
        red = partial_trace(rho, 1)
        assert red.layout.dims == (3,)
        assert abs(red.matrix.trace() - 1.0) < 1e-12
        red.validate()

    def test_keep_set_validation(self, rng):
        layout = SpaceLayout((2, 2))
        rho = DensityOp(random_density(rng, 4), layout)
        with pytest.raises(HilbertError):
            partial_trace(rho, ())
        with pytest.raises(HilbertError):
            partial_trace(rho, (0, 1))

    def test_trace_and_positivity_preserved(self, rng):
        # property: random density matrices on a 4x4x5 composite
        layout = SpaceLayout((4, 4, 5))
        for _ in range(5):
            rho = DensityOp(random_density(rng, 80), layout)
            for keep in ((0,), (1, 2), (0, 2)):
                red = partial_trace(rho, keep)
                assert abs(red.matrix.trace() - 1.0) < 1e-12
                assert np.linalg.eigvalsh(red.matrix)[0] > -1e-12

    def test_product_factor_recovery(self, rng):
        layout = SpaceLayout((3, 4))
        rho_a = random_density(rng, 3)
        rho_b = random_density(rng, 4)
        rho = DensityOp(np.kron(rho_a, rho_b), layout)
        np.testing.assert_allclose(partial_trace(rho, 0).matrix, rho_a, atol=1e-12)
        np.testing.assert_allclose(partial_trace(rho, 1).matrix, rho_b, atol=1e-12)

    def test_equal_purity_of_both_halves(self, rng):
        # equal Schmidt spectra on the two sides of a bipartite pure state
        layout = SpaceLayout((3, 5))
        psi = PureState(random_pure(rng, 15), layout)
        p0 = purity(partial_trace(psi, 0))
        p1 = purity(partial_trace(psi, 1))
        assert abs(p0 - p1) < 1e-10


class TestExpectation:
    def test_identity(self, rng):
        layout = SpaceLayout((4,))
        psi = PureState(random_pure(rng, 4), layout)
        op = LinearOp(np.eye(4, dtype=complex), layout, hermitian=True)
        assert abs(expectation(op, psi) - 1.0) < 1e-12

    def test_sigma_z_excited(self):
        layout = SpaceLayout((2,))
        up = PureState(basis(2, 1), layout)
        op = LinearOp(sigma_z(), layout, hermitian=True)
        assert abs(expectation(op, up) - 1.0) < 1e-14

    def test_number_operator_amplitude_list(self):
        # oracle: elementwise sum of n |c_n|^2
        amps = np.array([0.6, 0.5 + 0.1j, 0.4, 0.3 - 0.2j, 0.2], dtype=complex)
        amps /= np.linalg.norm(amps)
        layout = SpaceLayout((5,))
        a = destroy(5)
        op = LinearOp(a.conj().T @ a, layout, hermitian=True)
        direct = sum(n * abs(c) ** 2 for n, c in enumerate(amps))
        assert abs(expectation(op, PureState(amps, layout)) - direct) < 1e-12

    def test_real_for_hermitian(self, rng):
        layout = SpaceLayout((6,))
        h = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h = h + h.conj().T
        op = LinearOp(h, layout, hermitian=True)
        for _ in range(10):
            psi = PureState(random_pure(rng, 6), layout)
            assert abs(expectation(op, psi).imag) < 1e-10

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            expectation(LinearOp(np.eye(3, dtype=complex), SpaceLayout((3,))),
                        PureState(random_pure(rng, 4), SpaceLayout((4,))))


class TestPurity:
    def test_pure_projector(self, rng):
        layout = SpaceLayout((5,))
        psi = random_pure(rng, 5)
        assert abs(purity(DensityOp(np.outer(psi, psi.conj()), layout)) - 1.0) < 1e-12

    def test_maximally_mixed_qubit(self):
        assert abs(purity(DensityOp(np.eye(2) / 2, SpaceLayout((2,)))) - 0.5) < 1e-15

    def test_diag_07_03(self):
        # 0.49 + 0.09 by direct arithmetic
        rho = DensityOp(np.diag([0.7, 0.3]).astype(complex), SpaceLayout((2,)))
        assert abs(purity(rho) - 0.58) < 1e-15


class TestTypes:
    def test_pure_state_norm_validation(self):
        layout = SpaceLayout((2,))
        with pytest.raises(HilbertError):
            PureState(np.array([1.0, 1.0], dtype=complex), layout).validate()

    def test_density_validation(self, rng):
        layout = SpaceLayout((3,))
        DensityOp(random_density(rng, 3), layout).validate()
        bad = random_density(rng, 3)
        bad[0, 1] += 0.3
        with pytest.raises(HilbertError):
            DensityOp(bad, layout).validate()

    def test_linear_op_hermitian_hint(self):
        layout = SpaceLayout((2,))
        with pytest.raises(HilbertError):
            LinearOp(np.array([[0, 1], [0, 0]], dtype=complex), layout,
                     hermitian=True).validate()

    def test_trace_distance_basic(self):
        layout = SpaceLayout((2,))
        a = DensityOp(np.diag([1.0, 0.0]).astype(complex), layout)
        b = DensityOp(np.diag([0.0, 1.0]).astype(complex), layout)
        assert abs(trace_distance(a, b) - 1.0) < 1e-12
        assert trace_distance(a, a) < 1e-15

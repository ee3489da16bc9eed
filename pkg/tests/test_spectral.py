import numpy as np
import pytest

from mfspin import (
    DensityMatrix,
    DimensionMismatch,
    GeneratorSetUnsupported,
    Interaction,
    NcPolynomial,
    NotPermutationInvariant,
    Volume,
    build_hamiltonian,
    eigh,
    empirical_average,
    expectation,
    gibbs_state,
    k_family_limit,
    k_family_value,
    log_trace_exp,
    one_site,
    pauli_observable,
    sector_decompose,
    sector_log_trace_exp,
    sector_mean_field_value,
    von_neumann_entropy,
)
from conftest import SZ, random_density, random_hermitian


class TestEigh:
    def test_pauli_z(self):
        spec = eigh(SZ)
        np.testing.assert_allclose(spec.eigenvalues, [-1.0, 1.0])

    def test_identity(self):
        np.testing.assert_allclose(eigh(np.eye(3)).eigenvalues, np.ones(3))

    def test_random_reconstruction(self, rng):
        a = random_hermitian(50, rng)
        spec = eigh(a)
        recon = (spec.eigenvectors * spec.eigenvalues) @ spec.eigenvectors.conj().T
        assert np.abs(recon - a).max() < 1e-10 * np.abs(spec.eigenvalues).max()


class TestLogTraceExp:
    def test_zero_matrix(self):
        assert log_trace_exp(np.zeros((2, 2))) == pytest.approx(np.log(2.0))

    def test_two_level_field(self):
        lam = 1.7
        assert log_trace_exp(lam * SZ) == pytest.approx(np.log(2 * np.cosh(lam)))

    def test_shift_identity(self, rng):
        for _ in range(20):
            dim = int(rng.integers(2, 9))
            a = random_hermitian(dim, rng, 2.0)
            c = float(rng.normal())
            assert log_trace_exp(a + c * np.eye(dim)) == pytest.approx(
                log_trace_exp(a) + c, abs=1e-11
            )

    def test_perturbation_inequality(self, rng):
        for _ in range(50):
            dim = int(rng.integers(2, 10))
            a = random_hermitian(dim, rng, 2.0)
            w = random_hermitian(dim, rng, 1.5)
            shift = abs(log_trace_exp(a + w) - log_trace_exp(a))
            w_norm = np.abs(np.linalg.eigvalsh(w)).max()
            assert shift <= w_norm + 1e-10


class TestGibbsState:
    def test_zero_gives_maximally_mixed(self):
        rho = gibbs_state(np.zeros((4, 4)))
        np.testing.assert_allclose(rho.matrix, np.eye(4) / 4, atol=1e-14)

    def test_two_level_weights(self):
        lam = 0.9
        rho = gibbs_state(lam * SZ)
        z = 2 * np.cosh(lam)
        np.testing.assert_allclose(
            np.sort(np.diag(rho.matrix).real),
            np.sort([np.exp(lam) / z, np.exp(-lam) / z]),
            atol=1e-14,
        )

    def test_unit_trace(self, rng):
        rho = gibbs_state(random_hermitian(6, rng))
        assert rho.matrix.trace().real == pytest.approx(1.0)


class TestEntropy:
    def test_maximally_mixed(self):
        rho = DensityMatrix(np.eye(5) / 5)
        assert von_neumann_entropy(rho) == pytest.approx(np.log(5.0))

    def test_pure_state(self):
        rho = DensityMatrix(np.diag([1.0, 0.0, 0.0]))
        assert von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-14)

    def test_two_level_gibbs(self):
        rho = gibbs_state(1.0 * SZ)
        p = np.e / (np.e + 1 / np.e)
        expected = -p * np.log(p) - (1 - p) * np.log(1 - p)
        assert von_neumann_entropy(rho) == pytest.approx(expected)

    def test_bounds(self, rng):
        for _ in range(20):
            dim = int(rng.integers(2, 8))
            s = von_neumann_entropy(DensityMatrix(random_density(dim, rng)))
            assert -1e-12 <= s <= np.log(dim) + 1e-12


class TestExpectation:
    def test_maximally_mixed_traces(self, rng):
        a = random_hermitian(4, rng)
        rho = DensityMatrix(np.eye(4) / 4)
        assert expectation(rho, a) == pytest.approx(a.trace().real / 4)

    def test_identity_gives_one(self, rng):
        rho = DensityMatrix(random_density(5, rng))
        assert expectation(rho, np.eye(5)) == pytest.approx(1.0)

    def test_single_site_magnetization_tanh(self):
        lam = 0.65
        rho = gibbs_state(lam * SZ)
        assert expectation(rho, SZ) == pytest.approx(np.tanh(lam))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            expectation(DensityMatrix(np.eye(2) / 2), np.eye(3))


class TestGibbsVariationalPrinciple:
    def test_inequality_and_saturation(self, rng):
        for _ in range(50):
            dim = int(rng.integers(2, 9))
            a = random_hermitian(dim, rng, 1.5)
            rho = DensityMatrix(random_density(dim, rng))
            free = expectation(rho, a) + von_neumann_entropy(rho)
            top = log_trace_exp(a)
            assert free <= top + 1e-10
        a = random_hermitian(8, rng, 1.5)
        rho = gibbs_state(a)
        free = expectation(rho, a) + von_neumann_entropy(rho)
        assert free == pytest.approx(log_trace_exp(a), abs=1e-9)


class TestKFamily:
    def _chain_ops(self, rng=None):
        vol = Volume.chain(4)
        phi = Interaction(
            (pauli_observable("zz", 1.0), pauli_observable("x", -0.7)), n=2
        )
        h = build_hamiltonian(phi, vol).matrix
        xbar = empirical_average(pauli_observable("x"), vol).matrix
        gop = 4 * 0.8 * (xbar @ xbar)
        return h, gop

    def test_zero_mean_field_term(self, rng):
        h = random_hermitian(8, rng)
        for k in (1, 3, 16):
            assert k_family_value(h, np.zeros((8, 8)), k, 3) == pytest.approx(
                0.0, abs=1e-10
            )

    def test_commuting_is_k_independent(self):
        vol = Volume.chain(3)
        h = build_hamiltonian(
            Interaction((pauli_observable("z", 0.4),), n=2), vol
        ).matrix
        xbar = empirical_average(pauli_observable("z"), vol).matrix
        gop = 3 * 0.7 * (xbar @ xbar)
        values = [k_family_value(h, gop, k, 3) for k in (1, 2, 8, 64)]
        assert max(values) - min(values) < 1e-10
        assert values[0] == pytest.approx(k_family_limit(h, gop, 3), abs=1e-10)

    def test_error_at_least_halves_with_k(self):
        h, gop = self._chain_ops()
        limit = k_family_limit(h, gop, 4)
        errors = {k: abs(k_family_value(h, gop, k, 4) - limit) for k in (32, 64, 128)}
        assert errors[64] <= 0.6 * errors[32]
        assert errors[128] <= 0.6 * errors[64]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            k_family_value(np.zeros((2, 2)), np.zeros((4, 4)), 4, 2)


class TestSectors:
    def test_counts_n4(self):
        model = sector_decompose(4)
        by_spin = {s.twice_s: s.multiplicity for s in model.sectors}
        assert by_spin == {4: 1, 2: 3, 0: 2}

    @pytest.mark.parametrize("n_sites", [2, 3, 4, 7, 10])
    def test_dimension_sum(self, n_sites):
        model = sector_decompose(n_sites)
        total = sum(s.multiplicity * (s.twice_s + 1) for s in model.sectors)
        assert total == 2 ** n_sites
        assert all(s.multiplicity > 0 for s in model.sectors)

    def test_trivial_trace(self):
        model = sector_decompose(2)
        value = sector_log_trace_exp(model, None, SZ, None, None)
        assert value == pytest.approx(0.5 * np.log(4.0))

    def test_transverse_field_mean_field_matches_dense(self):
        phi = Interaction((pauli_observable("x", -0.6),), n=2)
        x_obs = pauli_observable("z")
        g = NcPolynomial({"xx": 0.8})
        from mfspin import mean_field_log_partition

        dense = mean_field_log_partition(phi, g, x_obs, None, 8)
        fast = sector_mean_field_value(phi, g, x_obs, None, 8)
        assert fast == pytest.approx(dense, abs=1e-9)

    def test_fast_path_matches_dense_randomized(self, rng):
        for _ in range(50):
            n_sites = int(rng.integers(2, 11))
            field = one_site(random_hermitian(2, rng, 0.8))
            x_obs = one_site(random_hermitian(2, rng))
            y_obs = one_site(random_hermitian(2, rng))
            lam = float(rng.uniform(-0.8, 0.8))
            g = NcPolynomial({"xx": lam, "xy": 0.2, "yx": 0.2})
            phi = Interaction((field,), n=2)
            from mfspin import mean_field_log_partition

            dense = mean_field_log_partition(phi, g, x_obs, y_obs, n_sites)
            fast = sector_mean_field_value(phi, g, x_obs, y_obs, n_sites)
            assert fast == pytest.approx(dense, abs=1e-9)

    def test_rejects_multi_site_interaction(self):
        phi = Interaction((pauli_observable("zz", -1.0),), n=2)
        with pytest.raises(NotPermutationInvariant):
            sector_mean_field_value(
                phi, NcPolynomial({}), pauli_observable("z"), None, 6
            )

    def test_rejects_large_site_dimension(self):
        model = sector_decompose(3)
        with pytest.raises(GeneratorSetUnsupported):
            sector_log_trace_exp(model, None, np.eye(3), None, None)


class TestProductStateConcentration:
    def test_error_halves_from_8_to_16(self, rng):
        for _ in range(50):
            rho1 = random_density(2, rng)
            x_mat = random_hermitian(2, rng)
            y_mat = random_hermitian(2, rng)
            mean_x = (rho1 @ x_mat).trace().real
            mean_y = (rho1 @ y_mat).trace().real
            errors = {}
            vol = Volume.chain(8)
            rho8 = rho1
            for _ in range(7):
                rho8 = np.kron(rho8, rho1)
            xbar = empirical_average(one_site(x_mat), vol).matrix
            ybar = empirical_average(one_site(y_mat), vol).matrix
            val8 = np.einsum("ij,jk,ki->", rho8, xbar, ybar).real
            x8 = np.einsum("ij,ji->", rho8, xbar).real
            y8 = np.einsum("ij,ji->", rho8, ybar).real
            # sixteen sites as two independent blocks of eight
            val16 = 0.5 * (val8 + x8 * y8)
            errors[8] = abs(val8 - mean_x * mean_y)
            errors[16] = abs(val16 - mean_x * mean_y)
            assert errors[16] <= 0.5 * errors[8] + 1e-12

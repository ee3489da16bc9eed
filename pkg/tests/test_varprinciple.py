import numpy as np
import pytest

from mfspin import (
    Interaction,
    NcPolynomial,
    NonOneSiteObservable,
    Rectangle,
    Volume,
    block_lower_bound,
    boundary_perturbation_check,
    finite_volume_pressure,
    legendre_transform,
    mean_field_log_partition,
    one_site,
    pauli_observable,
    pressure_surface,
    product_state_solve,
    quantization_gap,
    sector_mean_field_value,
    solve_rate_form,
    tilted_block_state,
)
from mfspin.varprinciple import boundary_site_ratio, straddle_fraction
from mfspin.harness import (
    oracle_scalar_curie_weiss,
    solve_curie_weiss_magnetization,
)
from conftest import SX, random_hermitian

FREE = Interaction((), n=2)
Z = pauli_observable("z")


def curie_weiss_rate_solution(lam, pressure_volumes=(1, 2, 3)):
    ps = pressure_surface(FREE, Z, None, list(pressure_volumes))
    rf = legendre_transform(ps)
    return solve_rate_form(rf, NcPolynomial({"xx": lam}), Rectangle.from_observables(Z, None))


class TestMeanFieldLogPartition:
    def test_single_site_square(self):
        lam = 0.7
        value = mean_field_log_partition(FREE, NcPolynomial({"xx": lam}), Z, None, 1)
        assert value == pytest.approx(lam + np.log(2.0))

    def test_zero_polynomial_equals_pressure(self):
        phi = Interaction((pauli_observable("zz", -0.4), pauli_observable("x", -0.3)), n=2)
        for n in (2, 3, 4):
            direct = mean_field_log_partition(phi, NcPolynomial({}), Z, None, n)
            tilted = finite_volume_pressure(phi, Z, None, 0.0, 0.0, n)
            assert direct == tilted

    def test_sequence_approaches_subcritical_limit(self):
        g = NcPolynomial({"xx": 0.25})
        d12 = mean_field_log_partition(FREE, g, Z, None, 12)
        d200 = sector_mean_field_value(FREE, g, Z, None, 200)
        assert abs(d200 - np.log(2.0)) < abs(d12 - np.log(2.0))
        assert d200 == pytest.approx(np.log(2.0), abs=5e-3)


class TestSolveRateForm:
    def test_zero_polynomial_recovers_pressure_at_origin(self):
        res = curie_weiss_rate_solution(0.0)
        assert res.value == pytest.approx(np.log(2.0), abs=1e-9)
        assert res.x_star == pytest.approx(0.0, abs=1e-6)

    def test_subcritical_curie_weiss(self):
        res = curie_weiss_rate_solution(0.25)
        assert res.value == pytest.approx(np.log(2.0), abs=1e-9)
        assert res.x_star == pytest.approx(0.0, abs=1e-6)
        assert not res.diagnostics["degenerate_pair"]

    def test_supercritical_symmetry_breaking(self):
        lam = 1.0
        res = curie_weiss_rate_solution(lam)
        m_star = solve_curie_weiss_magnetization(lam)
        assert res.x_star == pytest.approx(m_star, abs=1e-6)
        assert res.value == pytest.approx(oracle_scalar_curie_weiss(lam), abs=1e-8)
        assert res.value > np.log(2.0)
        assert res.diagnostics["degenerate_pair"]

    def test_value_dominates_grid(self):
        lam = 0.8
        ps = pressure_surface(FREE, Z, None, [1, 2, 3])
        rf = legendre_transform(ps)
        g = NcPolynomial({"xx": lam})
        res = solve_rate_form(rf, g, Rectangle.from_observables(Z, None))
        grid_best = (lam * rf.x ** 2 - rf.values[:, 0]).max()
        assert res.value >= grid_best - 1e-12


class TestProductStateSolve:
    def test_entropy_only(self):
        res = product_state_solve(None, Z, None, NcPolynomial({}))
        assert res.value == pytest.approx(np.log(2.0), abs=1e-9)

    def test_subcritical_quadratic(self):
        res = product_state_solve(None, Z, None, NcPolynomial({"xx": 0.25}))
        assert res.value == pytest.approx(np.log(2.0), abs=1e-8)
        assert res.x_star == pytest.approx(0.0, abs=1e-4)

    def test_transverse_field_gibbs(self):
        h = 1.1
        res = product_state_solve(one_site(-h * SX), Z, None, NcPolynomial({}))
        assert res.value == pytest.approx(np.log(2 * np.cosh(h)), abs=1e-9)

    def test_matches_rate_form_for_one_site_interactions(self):
        h, lam = 0.3, 0.25
        phi = Interaction((pauli_observable("x", -h),), n=2)
        ps = pressure_surface(phi, Z, None, [1, 2, 3])
        rf = legendre_transform(ps)
        g = NcPolynomial({"xx": lam})
        rate = solve_rate_form(rf, g, Rectangle.from_observables(Z, None))
        product = product_state_solve(one_site(-h * SX), Z, None, g)
        assert product.value == pytest.approx(rate.value, abs=1e-4)

    def test_supercritical_matches_oracle(self):
        lam = 1.0
        res = product_state_solve(None, Z, None, NcPolynomial({"xx": lam}))
        assert res.value == pytest.approx(oracle_scalar_curie_weiss(lam), abs=1e-8)

    def test_rejects_multi_site(self):
        with pytest.raises(NonOneSiteObservable):
            product_state_solve(None, pauli_observable("zz"), None, NcPolynomial({}))

    def test_three_level_sites(self):
        # spin-1 site with entropy only: value is log 3
        a = one_site(np.diag([1.0, 0.0, -1.0]))
        res = product_state_solve(None, a, None, NcPolynomial({}))
        assert res.value == pytest.approx(np.log(3.0), abs=1e-6)


class TestBlockLowerBound:
    def test_single_site_free_block(self):
        mu = tilted_block_state(FREE, Z, None, 0.0, 0.0, 1)
        bound, correction = block_lower_bound(FREE, NcPolynomial({}), Z, None, 1, mu)
        assert bound == pytest.approx(np.log(2.0))
        assert correction == 0.0

    def test_certified_below_direct_values(self):
        lam = 1.0
        g = NcPolynomial({"xx": lam})
        u_star = 2 * lam * solve_curie_weiss_magnetization(lam)
        for block in (2, 4):
            mu = tilted_block_state(FREE, Z, None, u_star, 0.0, block)
            bound, corr = block_lower_bound(FREE, g, Z, None, block, mu)
            for n in (8, 12):
                direct = mean_field_log_partition(FREE, g, Z, None, n)
                assert bound - corr <= direct + 1e-12

    def test_bound_nondecreasing_in_block(self):
        lam = 1.0
        g = NcPolynomial({"xx": lam})
        u_star = 2 * lam * solve_curie_weiss_magnetization(lam)
        values = []
        for block in (2, 4, 6):
            mu = tilted_block_state(FREE, Z, None, u_star, 0.0, block)
            bound, corr = block_lower_bound(FREE, g, Z, None, block, mu)
            values.append(bound - corr)
        assert values[1] >= values[0] - 1e-9
        assert values[2] >= values[1] - 1e-9

    def test_interacting_correction_is_positive(self):
        phi = Interaction((pauli_observable("zz", -0.4),), n=2)
        g = NcPolynomial({"xx": 0.3})
        mu = tilted_block_state(phi, Z, None, 0.2, 0.0, 4)
        bound, corr = block_lower_bound(phi, g, Z, None, 4, mu)
        assert corr > 0.0
        # certified stays below the extrapolated direct value
        directs = [(n, mean_field_log_partition(phi, g, Z, None, n)) for n in (6, 8, 10)]
        from mfspin import extrapolate_pressure

        limit, _ = extrapolate_pressure(directs)
        assert bound - corr <= limit + 1e-9

    def test_straddle_fractions(self):
        assert straddle_fraction(((0,),), (4,)) == 0.0
        assert straddle_fraction(((0,), (1,)), (4,)) == pytest.approx(0.25)
        assert straddle_fraction(((0, 0), (0, 1)), (2, 2)) == pytest.approx(0.5)
        assert boundary_site_ratio((6,)) == pytest.approx(2.0 / 6.0)
        assert boundary_site_ratio((1,)) == pytest.approx(1.0)


class TestTwoSidedSqueeze:
    def test_curie_weiss_squeeze(self):
        lam = 1.0
        g = NcPolynomial({"xx": lam})
        rate = curie_weiss_rate_solution(lam)
        u_star = 2 * lam * rate.x_star
        mu = tilted_block_state(FREE, Z, None, u_star, 0.0, 4)
        bound, corr = block_lower_bound(FREE, g, Z, None, 4, mu)
        directs = [(n, sector_mean_field_value(FREE, g, Z, None, n)) for n in (50, 100, 200)]
        from mfspin import extrapolate_pressure

        limit, err = extrapolate_pressure(directs)
        assert bound - corr <= limit + err + 1e-9
        assert limit == pytest.approx(rate.value, abs=2e-3)
        gaps = [abs(d - rate.value) for _, d in directs]
        assert gaps[-1] < gaps[0]


class TestQuantizationIndependence:
    def test_direct_value_gap_below_bound(self):
        g1 = NcPolynomial({"xy": 0.5, "yx": 0.5})
        g2 = NcPolynomial({"xy": 0.5 + 0.5j, "yx": 0.5 - 0.5j})
        x_obs, y_obs = pauli_observable("x"), Z
        previous = None
        for n in (4, 8):
            d1 = mean_field_log_partition(FREE, g1, x_obs, y_obs, n)
            d2 = mean_field_log_partition(FREE, g2, x_obs, y_obs, n)
            _, bound = quantization_gap(g1, g2, x_obs, y_obs, Volume.chain(n))
            assert abs(d1 - d2) <= bound
            if previous is not None:
                assert abs(d1 - d2) < previous
            previous = abs(d1 - d2)


class TestRateFormQuantizationInvariance:
    def test_value_ignores_word_ordering(self):
        # the solver consumes only classical values, which agree exactly
        from dataclasses import replace

        x_obs, y_obs = pauli_observable("x"), Z
        ps = pressure_surface(FREE, x_obs, y_obs, [1, 2, 3])
        rf = legendre_transform(ps, points=33)
        grid_rf = replace(rf, pressure=None)
        box = Rectangle.from_observables(x_obs, y_obs)
        g1 = NcPolynomial({"xy": 0.5, "yx": 0.5})
        g2 = NcPolynomial({"xy": 0.5 + 0.5j, "yx": 0.5 - 0.5j})
        r1 = solve_rate_form(grid_rf, g1, box)
        r2 = solve_rate_form(grid_rf, g2, box)
        assert r1.value == pytest.approx(r2.value, abs=1e-12)
        assert (r1.x_star, r1.y_star) == (r2.x_star, r2.y_star)


class TestBoundaryPerturbation:
    def test_zero_perturbation(self, rng):
        h = random_hermitian(8, rng)
        lhs, rhs, ok = boundary_perturbation_check(h, np.zeros((8, 8)), np.zeros((8, 8)))
        assert lhs == pytest.approx(0.0, abs=1e-12)
        assert ok

    def test_scalar_shift_saturates(self, rng):
        h = random_hermitian(4, rng)
        c = 0.37
        lhs, rhs, ok = boundary_perturbation_check(
            h, c * np.eye(4), np.zeros((4, 4))
        )
        assert lhs == pytest.approx(c, abs=1e-12)
        assert rhs == pytest.approx(c)
        assert ok

    def test_random_three_site_instances(self, rng):
        for _ in range(50):
            h = random_hermitian(8, rng, 1.5)
            w = random_hermitian(8, rng, 0.8)
            gop = random_hermitian(8, rng, 0.5)
            _, _, ok = boundary_perturbation_check(h, w, gop)
            assert ok

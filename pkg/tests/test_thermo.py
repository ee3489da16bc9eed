import numpy as np
import pytest

from mfspin import (
    InsufficientSamples,
    Interaction,
    Volume,
    extrapolate_pressure,
    finite_volume_pressure,
    involution_check,
    legendre_transform,
    pauli_observable,
    pressure_gradient,
    pressure_surface,
    synthetic_pressure_surface,
)
from mfspin.harness import oracle_transfer_matrix_1d
from conftest import random_small_model

FREE = Interaction((), n=2)


def binary_entropy_rate(x):
    """Conjugate of log 2 cosh u: the two-level rate function."""
    return (1 + x) / 2 * np.log1p(x) + (1 - x) / 2 * np.log1p(-x) - np.log(2.0)


class TestFiniteVolumePressure:
    @pytest.mark.parametrize("n_sites", [1, 2, 4, 6])
    def test_free_field_factorizes(self, n_sites):
        u = 0.83
        p = finite_volume_pressure(FREE, pauli_observable("z"), None, u, 0.0, n_sites)
        assert p == pytest.approx(np.log(2 * np.cosh(u)), abs=1e-12)

    def test_zero_tilt_free(self):
        p = finite_volume_pressure(FREE, pauli_observable("z"), None, 0.0, 0.0, 3)
        assert p == pytest.approx(np.log(2.0))

    def test_diagonal_chain_matches_transfer_matrix(self):
        phi = Interaction((pauli_observable("zz", -0.5),), n=2)
        samples = [
            (n, finite_volume_pressure(phi, pauli_observable("z"), None, 0.3, 0.0, n))
            for n in (4, 6, 8, 10)
        ]
        p_inf, _ = extrapolate_pressure(samples)
        assert p_inf == pytest.approx(oracle_transfer_matrix_1d(0.5, 0.3), abs=1e-3)


class TestPressureGradient:
    def test_symmetric_point_is_zero(self):
        gx, _ = pressure_gradient(FREE, pauli_observable("z"), None, 0.0, 0.0, 3)
        assert gx == pytest.approx(0.0, abs=1e-12)

    def test_matches_central_differences(self, rng):
        step = 1e-4
        for _ in range(50):
            phi, x_obs, y_obs = random_small_model(rng)
            u, v = rng.uniform(-1.5, 1.5, size=2)
            vol = Volume.chain(4)
            gx, gy = pressure_gradient(phi, x_obs, y_obs, u, v, vol)
            fd_x = (
                finite_volume_pressure(phi, x_obs, y_obs, u + step, v, vol)
                - finite_volume_pressure(phi, x_obs, y_obs, u - step, v, vol)
            ) / (2 * step)
            fd_y = (
                finite_volume_pressure(phi, x_obs, y_obs, u, v + step, vol)
                - finite_volume_pressure(phi, x_obs, y_obs, u, v - step, vol)
            ) / (2 * step)
            assert abs(gx - fd_x) <= 1e-6 * (1 + abs(gx))
            assert abs(gy - fd_y) <= 1e-6 * (1 + abs(gy))

    def test_gradient_stays_in_spectral_box(self, rng):
        for _ in range(10):
            phi, x_obs, y_obs = random_small_model(rng)
            u, v = rng.uniform(-3, 3, size=2)
            gx, gy = pressure_gradient(phi, x_obs, y_obs, u, v, Volume.chain(4))
            assert abs(gx) <= x_obs.norm + 1e-10
            assert abs(gy) <= y_obs.norm + 1e-10


class TestExtrapolation:
    def test_constant_sequence(self):
        p_inf, err = extrapolate_pressure([(4, 0.7), (6, 0.7), (8, 0.7)])
        assert p_inf == pytest.approx(0.7)
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_recovers_exact_model(self):
        a, b = 1.234567, -0.456
        samples = [(n, a + b / n) for n in (4, 8, 16, 32)]
        p_inf, _ = extrapolate_pressure(samples)
        assert p_inf == pytest.approx(a, abs=1e-12)

    def test_requires_three_volumes(self):
        with pytest.raises(InsufficientSamples):
            extrapolate_pressure([(4, 1.0), (8, 1.1)])


class TestPressureSurface:
    def test_free_two_level_matches_closed_form(self):
        x_obs, y_obs = pauli_observable("z"), pauli_observable("x")
        ps = pressure_surface(FREE, x_obs, y_obs, [1, 2, 3])
        uu, vv = np.meshgrid(ps.u, ps.v, indexing="ij")
        exact = np.log(2 * np.cosh(np.sqrt(uu ** 2 + vv ** 2)))
        assert np.abs(ps.p - exact).max() < 1e-8

    def test_even_in_tilt_for_symmetric_model(self):
        ps = pressure_surface(FREE, pauli_observable("z"), None, [1, 2, 3])
        np.testing.assert_allclose(ps.p, ps.p[::-1], atol=1e-12)

    def test_convexity_holds(self, rng):
        phi, x_obs, y_obs = random_small_model(rng)
        ps = pressure_surface(
            phi,
            x_obs,
            y_obs,
            [2, 3, 4],
            u_grid=np.linspace(-2, 2, 9),
            v_grid=np.linspace(-2, 2, 9),
        )
        assert ps.max_convexity_violation() <= 2 * ps.err.max() + 1e-9

    def test_midpoint_convexity_randomized(self, rng):
        for _ in range(50):
            phi, x_obs, y_obs = random_small_model(rng)
            a = rng.uniform(-2, 2, size=2)
            b = rng.uniform(-2, 2, size=2)
            mid = 0.5 * (a + b)
            vol = Volume.chain(4)
            pm = finite_volume_pressure(phi, x_obs, y_obs, mid[0], mid[1], vol)
            pa = finite_volume_pressure(phi, x_obs, y_obs, a[0], a[1], vol)
            pb = finite_volume_pressure(phi, x_obs, y_obs, b[0], b[1], vol)
            assert pm <= 0.5 * (pa + pb) + 1e-10

    def test_lipschitz_in_tilts(self, rng):
        for _ in range(20):
            phi, x_obs, y_obs = random_small_model(rng)
            u1, v1, u2, v2 = rng.uniform(-2, 2, size=4)
            vol = Volume.chain(4)
            p1 = finite_volume_pressure(phi, x_obs, y_obs, u1, v1, vol)
            p2 = finite_volume_pressure(phi, x_obs, y_obs, u2, v2, vol)
            budget = x_obs.norm * abs(u1 - u2) + y_obs.norm * abs(v1 - v2)
            assert abs(p1 - p2) <= budget + 1e-10

    def test_csv_round_trip_columns(self, tmp_path):
        ps = pressure_surface(FREE, pauli_observable("z"), None, [1, 2, 3])
        path = tmp_path / "surface.csv"
        ps.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "u,v,p,gx,gy,err"
        ps.to_json(tmp_path / "surface.json")


class TestLegendre:
    def test_two_level_rate_function(self):
        ps = pressure_surface(FREE, pauli_observable("z"), None, [1, 2, 3])
        rf = legendre_transform(ps)
        assert rf.evaluate(0.0) == pytest.approx(-np.log(2.0), abs=1e-10)
        for x in (0.25, -0.6, 0.9):
            assert rf.evaluate(x) == pytest.approx(binary_entropy_rate(x), abs=1e-9)

    def test_synthetic_quadratic_self_conjugate(self):
        u = np.linspace(-4, 4, 33)
        ps = synthetic_pressure_surface(lambda uu, vv: 0.5 * uu ** 2, u)
        rf = legendre_transform(ps, x_grid=np.linspace(-2, 2, 33))
        np.testing.assert_allclose(
            rf.values[:, 0], 0.5 * rf.x ** 2, atol=1e-9
        )

    def test_boundary_flag_outside_gradient_range(self):
        ps = pressure_surface(FREE, pauli_observable("z"), None, [1, 2, 3])
        rf = legendre_transform(ps, x_grid=np.linspace(-1, 1, 65))
        # tanh(4) ~ 0.9993: the outermost points exceed the reachable slope
        assert rf.at_boundary[0, 0] and rf.at_boundary[-1, 0]
        assert not rf.at_boundary[32, 0]

    def test_rate_convex_and_floored(self):
        ps = pressure_surface(FREE, pauli_observable("z"), None, [1, 2, 3])
        rf = legendre_transform(ps)
        assert rf.max_convexity_violation() <= 1e-8
        assert rf.values.min() >= -np.log(2.0) - 1e-9


class TestInvolution:
    def test_synthetic_quadratic(self):
        u = np.linspace(-4, 4, 33)
        ps = synthetic_pressure_surface(lambda uu, vv: 0.5 * uu ** 2, u)
        rf = legendre_transform(ps, x_grid=np.linspace(-4.5, 4.5, 65))
        assert involution_check(ps, rf) < 1e-10

    def test_two_level_within_grid_tolerance(self):
        ps = pressure_surface(FREE, pauli_observable("z"), None, [1, 2, 3])
        rf = legendre_transform(ps)
        deviation = involution_check(ps, rf)
        assert deviation < 1e-4
        assert deviation <= 5 * rf.residual.max() + 1e-12

    def test_anisotropic_pressures(self):
        # tilted valleys exercise the line-search acceleration
        u = np.linspace(-4, 4, 33)
        v = np.linspace(-4, 4, 33)
        cases = [
            lambda uu, vv: np.log(2 * np.cosh(np.sqrt((uu + 0.9 * vv) ** 2 + 0.3 * vv ** 2))),
            lambda uu, vv: np.log(2 * np.cosh(uu + 0.8 * vv)) + 0.25 * vv ** 2,
        ]
        for fn in cases:
            ps = synthetic_pressure_surface(fn, u, v)
            rf = legendre_transform(ps)
            assert involution_check(ps, rf) < 1e-8

    def test_deviation_shrinks_with_refinement(self):
        # the grid-restricted sup exposes the pure grid error
        def run(points):
            u = np.linspace(-4, 4, 33)
            ps = synthetic_pressure_surface(
                lambda uu, vv: np.log(2 * np.cosh(uu)), u
            )
            rf = legendre_transform(ps, x_grid=np.linspace(-1, 1, points))
            return involution_check(ps, rf, grid_only=True)

        coarse, fine = run(33), run(65)
        assert fine < coarse

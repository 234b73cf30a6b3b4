import numpy as np
import pytest

from sgnms.core import DiffOperator, Grid1D, PhysicalState
from sgnms.errors import DryStateError
from sgnms.scenarios import still_water, uniform_stream
from sgnms.structure import (
    H,
    P,
    PHI,
    Q,
    S,
    U,
    V,
    SkewForm,
    build_K,
    build_M,
    el_residuals,
    grad_S,
    hamiltonian_S,
    hess_S,
    lagrangian_density,
    lift,
    ms_residual,
    project,
    residual_energy,
    residual_mass,
    residual_momentum,
    residual_momentum_flux,
    residual_tangential,
    traveling_z_t,
)
from sgnms.verification import (
    check_appendix_equivalence,
    gradient_fd_error,
    hessian_asymmetry,
    hessian_fd_error,
)


def basis(i):
    e = np.zeros(8)
    e[i] = 1.0
    return e


class TestSkewForms:
    def test_m_entries(self):
        M = build_M().matrix
        expected = np.zeros((8, 8))
        expected[0, 1] = 1.0
        expected[1, 0] = -1.0
        expected[0, 4] = 1.0 / 3.0
        expected[4, 0] = -1.0 / 3.0
        assert np.array_equal(M, expected)

    def test_k_entries(self):
        K = build_K().matrix
        expected = np.zeros((8, 8))
        expected[0, 6] = 1.0 / 3.0
        expected[6, 0] = -1.0 / 3.0
        expected[1, 5] = -1.0
        expected[5, 1] = 1.0
        assert np.array_equal(K, expected)

    def test_m_applied_to_basis(self):
        # column 2 of M maps e_2 to +e_1
        out = build_M().apply(basis(PHI))
        assert out[H] == 1.0
        assert np.abs(np.delete(out, H)).max() == 0.0

    def test_k_applied_to_basis(self):
        out = build_K().apply(basis(Q))
        assert out[PHI] == -1.0
        assert np.abs(np.delete(out, PHI)).max() == 0.0

    def test_exact_skewness(self):
        for form in (build_M(), build_K()):
            assert np.array_equal(form.matrix, -form.matrix.T)

    def test_ranks(self):
        assert np.linalg.matrix_rank(build_M().matrix) == 2
        assert np.linalg.matrix_rank(build_K().matrix) == 4

    def test_diagonal_rejected(self):
        with pytest.raises(ValueError):
            SkewForm([(3, 3, 1.0)])


class TestHamiltonian:
    def test_still_water_value(self, params):
        z = np.array([1.0, 0, 0, 0, 0, 0, 0, 0])
        assert hamiltonian_S(z, params) == pytest.approx(-0.5, abs=0)

    def test_hand_value_balanced(self, params):
        z = np.array([1.0, 0, 1.0, 0, 0, 1.0, 0, 0])
        assert hamiltonian_S(z, params) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value_vertical(self, params):
        z = np.array([2.0, 0, 0, 1.0, 2.0, 0, 0, 0])
        assert hamiltonian_S(z, params) == pytest.approx(-7.0 / 3.0, rel=1e-15)

    def test_dry_state_rejected(self, params):
        z = np.zeros(8)
        with pytest.raises(DryStateError):
            hamiltonian_S(z, params)

    def test_grad_at_zero(self, params):
        assert np.array_equal(grad_S(np.zeros(8), params), np.zeros(8))

    def test_grad_at_rest(self, params):
        g = grad_S(np.array([1.0, 0, 0, 0, 0, 0, 0, 0]), params)
        expected = np.zeros(8)
        expected[H] = -1.0
        assert np.array_equal(g, expected)

    def test_grad_matches_finite_differences(self, params, rng):
        assert gradient_fd_error(params, rng, count=1000) <= 1e-6

    def test_hessian_row_h(self, params, rng):
        z = rng.uniform(-2, 2, size=(8, 50))
        z[H] = rng.uniform(0.1, 3.0, size=50)
        Hs = hess_S(z, params)
        assert np.all(Hs[:, H, H] == -params.g)

    def test_hessian_exactly_symmetric(self, params, rng):
        assert hessian_asymmetry(params, rng) == 0.0

    def test_hessian_matches_fd(self, params, rng):
        assert hessian_fd_error(params, rng, count=300) <= 1e-6


def test_reduced_S_is_onshell_hamiltonian(params, wave02_setup):
    # eliminating the auxiliary components from S leaves
    # h u^2/2 - h^3 u_x^2/6 - g h^2/2, so at lifted points the reduced
    # diagnostic and the full S agree pointwise
    from sgnms.structure import reduced_S

    _, grid, op, zs = wave02_setup
    full = hamiltonian_S(zs.z, params)
    reduced = reduced_S(project(zs), op, params)
    assert np.abs(full - reduced).max() < 1e-13


class TestLift:
    def test_still_water(self, params):
        grid = Grid1D(20.0, 33)
        op = DiffOperator(grid, "fourier")
        zs = lift(still_water(1.5).build(grid), op)
        expected = np.zeros((8, grid.n))
        expected[H] = 1.5
        assert np.abs(zs.z - expected).max() < 1e-14
        assert zs.phi_slope == pytest.approx(0.0, abs=1e-14)

    def test_uniform_stream(self, params):
        grid = Grid1D(20.0, 33)
        op = DiffOperator(grid, "fourier")
        zs = lift(uniform_stream(1.0, 0.7).build(grid), op)
        assert np.abs(zs.z[V]).max() < 1e-13
        assert np.abs(zs.z[S]).max() < 1e-13
        assert np.abs(zs.z[Q] - 0.7).max() < 1e-13
        assert zs.phi_slope == pytest.approx(0.7, abs=1e-13)
        assert np.abs(zs.z[PHI]).max() < 1e-12  # potential is purely secular

    def test_project_round_trip(self, wave02_setup):
        _, grid, op, zs = wave02_setup
        state = project(zs)
        zs2 = lift(state, op)
        assert np.array_equal(zs2.z[H], zs.z[H])
        assert np.array_equal(zs2.z[U], zs.z[U])
        assert np.abs(zs2.z - zs.z).max() < 1e-12

    def test_gauge_anchor(self, wave02_setup):
        _, _, _, zs = wave02_setup
        assert zs.phi_total()[0] == pytest.approx(0.0, abs=1e-14)

    def test_dry_rejected(self):
        grid = Grid1D(20.0, 33)
        with pytest.raises(DryStateError):
            PhysicalState(grid, np.zeros(grid.n), np.zeros(grid.n))


class TestMsResidual:
    def test_still_water_balanced(self, params):
        grid = Grid1D(20.0, 33)
        op = DiffOperator(grid, "fourier")
        zs = lift(still_water(1.0).build(grid), op)
        z_t = np.zeros((8, grid.n))
        z_t[PHI] = -params.g * 1.0
        res = ms_residual(zs, z_t, op, params)
        assert np.abs(res).max() < 1e-14

    def test_q_mismatch_row(self, params, rng):
        grid = Grid1D(20.0, 33)
        op = DiffOperator(grid, "fourier")
        zs = lift(still_water(1.0).build(grid), op)
        z = zs.z.copy()
        z[Q] = 0.3  # no longer h*u
        from sgnms.structure import ZState

        broken = ZState(grid, z, t=0.0)
        res = ms_residual(broken, np.zeros((8, grid.n)), op, params)
        h, u, s, p, v = z[H], z[U], z[S], z[P], z[V]
        expected = h * u - z[Q] - s * (p - h * v) / 3.0
        assert np.abs(res[U] - expected).max() < 1e-14

    def test_traveling_wave_residual_decays(self, params, wave02):
        sups = []
        for n in (64, 128):
            grid = Grid1D(78.0, n)
            op = DiffOperator(grid, "fourier")
            zs = lift(wave02.build(grid), op)
            z_t = traveling_z_t(zs, wave02.speed, op, params)
            sups.append(np.abs(ms_residual(zs, z_t, op, params)).max())
        assert sups[1] < 1e-2 * sups[0]


class TestPhysicalResiduals:
    def test_still_water_all_zero(self, params):
        # fd2 derivatives of constants are exact zeros; fourier leaves FFT
        # round-off of order 1e-15
        grid = Grid1D(20.0, 65)
        state = still_water(1.0).build(grid)
        zero = np.zeros(grid.n)
        for kind, tol in (("fd2", 0.0), ("fourier", 1e-13)):
            op = DiffOperator(grid, kind)
            assert np.abs(residual_mass(state, zero, op)).max() <= tol
            assert np.abs(residual_momentum(state, zero, zero, op, params)).max() <= tol
            assert np.abs(residual_momentum_flux(state, zero, zero, zero, op, params)).max() <= tol
            assert np.abs(residual_energy(state, zero, zero, zero, op, params)).max() <= tol
            assert np.abs(residual_tangential(state, zero, zero, zero, op, params)).max() <= tol

    def test_static_bump_no_flux(self, params):
        grid = Grid1D(20.0, 65)
        op = DiffOperator(grid, "fourier")
        h = 1.0 + 0.1 * np.cos(2 * np.pi * grid.x / grid.length)
        state = PhysicalState(grid, h, np.zeros(grid.n))
        assert np.abs(residual_mass(state, np.zeros(grid.n), op)).max() == 0.0

    def test_traveling_wave_satisfies_all_laws(self, params, wave02_setup):
        scenario, grid, op, zs = wave02_setup
        state = project(zs)
        c = scenario.speed
        h_t = -c * op(state.h)
        u_x = op(state.u)
        u_t = -c * u_x
        u_xt = -c * op(u_x)
        for name, res in [
            ("mass", residual_mass(state, h_t, op)),
            ("momentum", residual_momentum(state, u_t, u_xt, op, params)),
            ("momentum-flux", residual_momentum_flux(state, h_t, u_t, u_xt, op, params)),
            ("energy", residual_energy(state, h_t, u_t, u_xt, op, params)),
            ("tangential", residual_tangential(state, h_t, u_t, u_xt, op, params)),
        ]:
            assert np.abs(res).max() < 1e-8, name


class TestLagrangian:
    def test_rest_depth_value(self, params):
        grid = Grid1D(20.0, 33)
        zero = np.zeros(grid.n)
        one = np.ones(grid.n)
        L = lagrangian_density(one, zero, zero, zero, zero, zero, zero, zero, zero, params)
        assert np.abs(L + 0.5).max() == 0.0

    def test_still_water_value(self, params):
        grid = Grid1D(20.0, 33)
        zero = np.zeros(grid.n)
        h0 = 1.3
        h = np.full(grid.n, h0)
        L = lagrangian_density(h, zero, zero, zero, zero, zero, zero, zero, zero, params)
        assert np.abs(L + 0.5 * params.g * h0**2).max() < 1e-14

    def test_el_still_water(self, params):
        grid = Grid1D(20.0, 33)
        zero = np.zeros(grid.n)
        h0 = 1.0
        h = np.full(grid.n, h0)
        phi_t = np.full(grid.n, -params.g * h0)
        res = el_residuals(h, zero, zero, zero, zero, zero, zero, zero, zero, zero,
                           phi_t, zero, params)
        for r in res:
            assert np.abs(r).max() < 1e-14

    def test_el_multiplier_mismatch(self, params, rng):
        grid = Grid1D(20.0, 33)
        zero = np.zeros(grid.n)
        u = rng.standard_normal(grid.n)
        mu = rng.standard_normal(grid.n)
        res = el_residuals(np.ones(grid.n), u, zero, mu, zero, zero, zero, zero,
                           zero, zero, zero, zero, params)
        assert np.array_equal(res[0], mu - u)

    def test_substituted_constraint_matches_direct_value(self, params, wave02_setup):
        # with mu = u the constraint nu = h_t + mu h_x reproduces the
        # vertical velocity, so the density can be evaluated either way
        scenario, grid, op, zs = wave02_setup
        h, u, v = zs.z[0], zs.z[2], zs.z[3]
        h_x = op(h)
        h_t = -scenario.speed * h_x
        phi = zs.phi_total()
        phi_x = zs.phi_x(op)
        mu_x = op(u)
        direct = lagrangian_density(h, h_t, h_x, phi, phi_x, u, v, u, mu_x, params)
        nu = h_t + u * h_x
        assert np.abs(nu - v).max() < 1e-10
        explicit = (
            nu * phi - 0.5 * params.g * h * h
            + h * (u * u - 0.5 * u * u + nu * v / 3.0 - v * v / 6.0 + phi * mu_x)
        )
        assert np.abs(direct - explicit).max() < 1e-12 * max(1.0, np.abs(explicit).max())

    def test_appendix_equivalence(self, params):
        for result in check_appendix_equivalence(params):
            assert result.passed, result

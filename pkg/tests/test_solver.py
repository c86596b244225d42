"""Operators, stepping, subsystem exactness, Picard contraction."""

import numpy as np
import pytest

from nemflow import admissibility as adm
from nemflow.coefficients import (CoefficientSet,
                                  default_nematic_coefficients)
from nemflow.errors import (BlowUpError, EllipticityError,
                            PicardNonConvergenceError,
                            TemperaturePositivityError)
from nemflow.grid import Grid, ScalarField, VectorField, divergence, gradient
from nemflow.initial_data import (equilibrium_state, preset_state,
                                  random_small_state, shear_twist_state,
                                  state_from_modes, tilt_to_director)
from nemflow.solver import (Rates, SimState, SolverConfig,
                            assemble_linear_operators, check_ellipticity,
                            recover_pressure, renormalize_director,
                            rhs_nonlinear, run, step_imex, step_picard)


@pytest.fixture(scope="module")
def grid():
    return Grid((32, 32))


@pytest.fixture(scope="module")
def coeffs():
    return default_nematic_coefficients(2)


@pytest.fixture(scope="module")
def const_coeffs():
    return default_nematic_coefficients(2, theta_dependence=False)


class TestDefaultCoefficients:
    def test_admissible(self, coeffs):
        s = adm.ViscositySample.from_coefficients(coeffs, 1.0, dim=3)
        rep = adm.full_report(s, trials=2000, seed=0)
        assert rep.heat_ok and rep.incompressible_ok and rep.compressible_ok

    def test_elliptic(self, coeffs):
        assert check_ellipticity(coeffs).passed


class TestEllipticity:
    def test_one_constant_passes(self):
        c = CoefficientSet(1.0, (1.0, 0.0),
                           [0, 0, -0.5, 0.5, 1.0, 0, 0, 0, 0],
                           1.0, 0.0, (1.0, 0, 0, 0))
        rep = check_ellipticity(c)
        assert rep.passed

    def test_frank_gap_violation(self):
        # K2 + K4 = 1 with K1 = 1: 2(K2+K4) + K3 >= K1
        c = CoefficientSet(1.0, (1.0, 0.0),
                           [0, 0, -0.5, 0.5, 1.0, 0, 0, 0, 0],
                           1.0, 0.0, (1.0, 1.0, 0.0, 0.0))
        rep = check_ellipticity(c)
        assert not rep.passed
        assert rep.margins["frank_gap"] <= 0

    def test_lambda_sum_violation(self):
        c = CoefficientSet(1.0, (1.0, 0.0),
                           [0, 0, -0.5, 0.5, 1.0, 0, 0, 0, 0],
                           1.0, -2.0, (1.0, 0, 0, 0))
        rep = check_ellipticity(c)
        assert not rep.passed
        assert rep.margins["heat_lambda_sum"] <= 0

    def test_gamma1_band_enforced(self):
        # gamma1 = 0 identically
        c = CoefficientSet(1.0, (1.0, 0.0),
                           [0, 0, 0, 0, 1.0, 0, 0, 0, 0],
                           1.0, 0.0, (1.0, 0, 0, 0))
        rep = check_ellipticity(c)
        assert not rep.passed
        assert rep.margins["gamma1_band"] <= 0


class TestSymbols:
    def test_thermal_symbol(self, grid):
        c = CoefficientSet(1.0, (1.0, 0.0), [0, 0, -1, 0.2, 1, 0, 0, 0, 0],
                           2.0, 0.7, (1.0, 0, 0, 0))
        ops = assemble_linear_operators(c, grid)
        k = grid.wavenumbers
        expected = -(2.0 * grid.k_squared + 0.7 * k[0] ** 2)
        assert np.max(np.abs(ops.thermal - expected)) <= 1e-12

    def test_director_symbol_pure_laplacian(self, grid):
        # K2 = K3 = K4 = 0: symbol -K1 |k|^2 Id / gamma1
        c = CoefficientSet(1.0, (1.0, 0.0), [0, 0, -1, 1, 1, 0, 0, 0, 0],
                           1.0, 0.0, (3.0, 0, 0, 0))
        ops = assemble_linear_operators(c, grid)
        gamma1 = 2.0
        expected = -3.0 * grid.k_squared / gamma1
        for i in range(2):
            assert np.max(np.abs(ops.director[..., i, i] - expected)) <= 1e-12
        assert np.max(np.abs(ops.director[..., 0, 1])) <= 1e-12

    def test_velocity_symbol_isotropic(self, grid):
        # alpha4 only: after projection, -(alpha4/2)|k|^2 on the
        # divergence-free subspace
        from nemflow.solver import _velocity_symbol
        c = CoefficientSet(1.0, (1.0, 0.0), [0, 0, 0, 0, 2.0, 0, 0, 0, 0],
                           1.0, 0.0, (1.0, 0, 0, 0))
        sym = _velocity_symbol(c, grid)
        k = grid.wavenumbers
        k2 = grid.k_squared
        # divergence-free direction at mode k: perp = (-k2, k1)/|k|
        nz = k2 > 0
        perp = np.stack([-k[1], k[0]])
        perp = perp / np.sqrt(np.where(nz, k2, 1.0))
        Av = np.einsum("...ij,j...->i...", sym, perp)
        val = np.einsum("i...,i...->...", perp, Av)
        assert np.max(np.abs(val[nz] + 1.0 * k2[nz])) <= 1e-10

    def test_velocity_symbol_oriented_shear(self, grid):
        """u parallel to the director, wavevector orthogonal: the decay
        rate is the directional viscosity (alpha3+alpha4+alpha6)/2
        (hand-evaluated from the stress formula on one complex mode)."""
        from nemflow.solver import _velocity_symbol
        alpha = [0.0, 0.3, -1.0, 0.4, 2.0, 0.25, -0.15, 0.0, 0.0]
        c = CoefficientSet(1.0, (1.0, 0.0), alpha, 1.0, 0.0, (1.0, 0, 0, 0))
        sym = _velocity_symbol(c, grid)
        rate = (alpha[3] + alpha[4] + alpha[6]) / 2.0
        assert sym[0, 1, 0, 0] == pytest.approx(-rate, rel=1e-12)


class TestEquilibriumFixedPoint:
    @pytest.mark.parametrize("scheme", ["imex1", "picard"])
    def test_exact_fixed_point(self, grid, coeffs, scheme):
        state = equilibrium_state(grid, coeffs)
        cfg = SolverConfig(dt=1e-2, t_end=5e-2, scheme=scheme)
        res = run(state, coeffs, cfg)
        fin = res.final_state
        assert fin.u.max_norm() == 0.0
        assert np.max(np.abs(fin.n.values - state.n.values)) == 0.0
        assert np.max(np.abs(fin.theta.values - state.theta.values)) == 0.0

    def test_picard_converges_immediately(self, grid, coeffs):
        state = equilibrium_state(grid, coeffs)
        cfg = SolverConfig(dt=1e-2, t_end=1e-2, scheme="picard")
        res = run(state, coeffs, cfg)
        assert len(res.picard_history[0]) == 1


class TestRhs:
    def test_equilibrium_residuals_vanish(self, grid, coeffs):
        state = equilibrium_state(grid, coeffs)
        ops = assemble_linear_operators(coeffs, grid)
        res = rhs_nonlinear(state, coeffs, ops, Rates.zero(grid))
        assert res.F_u.max_norm() <= 1e-14
        assert res.F_n.max_norm() <= 1e-14
        assert res.F_theta.max_norm() <= 1e-14

    def test_theta_perturbation_quadratic_residual(self, grid, coeffs):
        """Beyond the frozen heat operator the residual is O(eps^2)
        (nonconstant-coefficient corrections)."""
        eps = 1e-3
        state = state_from_modes(grid, coeffs,
                                 theta_modes=[((1, 1), eps, 0.0)])
        ops = assemble_linear_operators(coeffs, grid)
        res = rhs_nonlinear(state, coeffs, ops, Rates.zero(grid))
        assert res.F_theta.max_norm() < 10 * eps**2

    def test_pure_twist_momentum_residual_is_elastic(self, grid, coeffs):
        """No flow: the momentum residual equals the projected elastic
        back-reaction div sigma^E plus the viscous response to the
        director relaxation rate."""
        state = shear_twist_state(grid, coeffs, epsilon=1e-2)
        state = SimState(t=0.0, u=VectorField.zeros(grid), n=state.n,
                         theta=state.theta)
        ops = assemble_linear_operators(coeffs, grid)
        res = rhs_nonlinear(state, coeffs, ops, Rates.zero(grid))
        from nemflow.grid import leray_project, truncate
        from nemflow.solver import evaluate_state
        ev = evaluate_state(state, coeffs)
        from nemflow.grid import TensorField
        stress = TensorField.from_values(
            grid, ev.sigma_E.values + ev.sigma_L.values)
        expected = leray_project(truncate(divergence(truncate(stress))))
        assert np.max(np.abs(res.F_u.values - expected.values)) <= 1e-12


class TestHeatOnly:
    mu = 1.0 * 5 + 0.3 * 4  # lambda1 |k|^2 + lambda2 (n.k)^2 at k=(2,1)

    def make(self, grid, amp=0.01):
        c = CoefficientSet(1.0, (1.0, 0.0),
                           [0, 0.1, -1.0, 0.2, 1.0, 0.2, -0.6, 0, 0],
                           1.0, 0.3, (1.0, 0.1, 0.2, 0.05))
        state = state_from_modes(grid, c, theta_modes=[((2, 1), amp, 0.3)])
        return c, state

    def test_backward_euler_amplification_exact(self, grid):
        c, state = self.make(grid)
        dt = 1e-3
        cfg = SolverConfig(dt=dt, t_end=dt, subsystem="heat-only")
        res = run(state, c, cfg)
        x, y = grid.coordinates()
        factor = 1.0 / (1.0 + dt * self.mu)
        expected = 1.0 + 0.01 * factor * np.cos(2 * x + y + 0.3)
        assert np.max(np.abs(res.final_state.theta.values - expected)) <= 1e-14

    def test_first_order_convergence(self, grid):
        c, state = self.make(grid)
        T = 0.1
        errs = []
        x, y = grid.coordinates()
        exact = 1.0 + 0.01 * np.exp(-self.mu * T) * np.cos(2 * x + y + 0.3)
        for dt in (2e-3, 1e-3, 5e-4):
            cfg = SolverConfig(dt=dt, t_end=T, subsystem="heat-only",
                               snapshot_stride=10**6)
            res = run(state, c, cfg)
            errs.append(np.max(np.abs(res.final_state.theta.values - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 1.0) <= 0.1)


class TestStokesOnly:
    def make(self, grid):
        # alpha3 = alpha6 = 0 so the u || n, k _|_ n mode decays at the
        # bare rate (alpha4/2)|k|^2
        c = CoefficientSet(1.0, (1.0, 0.0), [0, 0, -1.0, 0.0, 2.0, 0.3, 0, 0, 0],
                           1.0, 0.0, (1.0, 0, 0, 0))
        state = state_from_modes(grid, c,
                                 u_modes=[((0, 1), 0, 0.01, 0.0)])
        return c, state

    def test_exact_decay_first_order(self, grid):
        c, state = self.make(grid)
        T = 0.1
        rate = 2.0 / 2.0 * 1.0  # (alpha3+alpha4+alpha6)/2 |k|^2, k = (0,1)
        errs = []
        exact = state.u.values * np.exp(-rate * T)
        for dt in (2e-3, 1e-3, 5e-4):
            cfg = SolverConfig(dt=dt, t_end=T, subsystem="stokes-only",
                               snapshot_stride=10**6)
            res = run(state, c, cfg)
            errs.append(np.max(np.abs(res.final_state.u.values - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 1.0) <= 0.1)

    def test_divergence_free_every_step(self, grid, coeffs):
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=5)
        cfg = SolverConfig(dt=1e-3, t_end=2e-2, snapshot_stride=1)
        res = run(state, coeffs, cfg)
        for _, snap in res.snapshots:
            scale = max(snap.u.max_norm(), 1e-30)
            assert divergence(snap.u).max_norm() <= 1e-10 * scale


class TestDirectorConstraint:
    def test_renormalize_identity_on_unit(self, grid, coeffs):
        n = equilibrium_state(grid, coeffs).n
        out, dev = renormalize_director(n)
        assert dev <= 1e-15
        assert np.max(np.abs(out.values - n.values)) <= 1e-15

    def test_renormalize_uniform_scaling(self, grid):
        vals = np.zeros((2,) + grid.shape)
        vals[0] = 1.1
        out, dev = renormalize_director(VectorField.from_values(grid, vals))
        assert dev == pytest.approx(1.1**2 - 1, rel=1e-12)
        assert np.allclose(out.values[0], 1.0)

    def test_zero_vector_rejected(self, grid):
        with pytest.raises(BlowUpError):
            renormalize_director(VectorField.zeros(grid))

    def test_unit_norm_after_every_step(self, grid, coeffs):
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=6)
        cfg = SolverConfig(dt=1e-3, t_end=1e-2, snapshot_stride=1)
        res = run(state, coeffs, cfg)
        for _, snap in res.snapshots:
            assert snap.constraint_violation() <= 1e-14

    def test_pre_renorm_drift_second_order(self, grid, coeffs):
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=7)
        devs = []
        for dt in (1e-3, 5e-4, 2.5e-4):
            cfg = SolverConfig(dt=dt, t_end=dt, snapshot_stride=10**6)
            res = run(state, coeffs, cfg)
            devs.append(res.pre_renorm_deviations[0])
        orders = np.log2(np.array(devs[:-1]) / np.array(devs[1:]))
        assert np.all(orders >= 1.8)


class TestPicard:
    def test_small_data_contraction(self, grid, coeffs):
        """Every iterate ratio < 1; the leading contraction factor
        (first-iteration ratio) shrinks as the data shrinks."""
        first_ratio = {}
        for eps in (1e-2, 1e-3):
            state = random_small_state(grid, coeffs, epsilon=eps, seed=8)
            cfg = SolverConfig(dt=1e-3, t_end=1e-3, scheme="picard",
                               picard_tol=1e-12, picard_max_iters=50)
            res = run(state, coeffs, cfg)
            diffs = np.array(res.picard_history[0])
            assert np.all(diffs[1:] / diffs[:-1] < 1.0)
            first_ratio[eps] = diffs[1] / diffs[0]
        assert first_ratio[1e-3] < first_ratio[1e-2]

    def test_nonconvergence_raises(self, grid, coeffs):
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=9)
        cfg = SolverConfig(dt=1e-3, t_end=1e-3, scheme="picard",
                           picard_tol=1e-16, picard_max_iters=2)
        with pytest.raises(PicardNonConvergenceError):
            run(state, coeffs, cfg)

    def test_matches_imex_to_first_order(self, grid, coeffs):
        """One Picard slab equals the IMEX step up to O(dt^2)."""
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=10)
        dt = 1e-3
        a = run(state, coeffs, SolverConfig(dt=dt, t_end=dt)).final_state
        b = run(state, coeffs, SolverConfig(dt=dt, t_end=dt, scheme="picard",
                                            picard_tol=1e-13,
                                            picard_max_iters=60)).final_state
        gap = np.max(np.abs(a.u.values - b.u.values))
        assert gap <= 100 * dt**2  # loose constant; both are O(dt) accurate


class TestGuards:
    def test_theta_floor_aborts(self, grid, coeffs):
        vals = np.full(grid.shape, 0.05)  # below theta_ref/10
        state = equilibrium_state(grid, coeffs)
        cold = SimState(t=0.0, u=state.u, n=state.n,
                        theta=ScalarField.from_values(grid, vals))
        cfg = SolverConfig(dt=1e-3, t_end=1e-3)
        with pytest.raises(TemperaturePositivityError):
            run(cold, coeffs, cfg)

    def test_non_elliptic_rejected(self, grid):
        c = CoefficientSet(1.0, (1.0, 0.0), [0, 0, 0, 0, 1.0, 0, 0, 0, 0],
                           1.0, 0.0, (1.0, 0, 0, 0))
        state = equilibrium_state(grid, c)
        with pytest.raises(EllipticityError):
            run(state, c, SolverConfig(dt=1e-3, t_end=1e-3))


class TestPressure:
    def test_projection_consistency(self, grid, coeffs):
        """f - grad p is divergence free for the unprojected momentum
        right-hand side f."""
        from nemflow.grid import TensorField, advect, truncate
        from nemflow.solver import evaluate_state
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=11)
        ev = evaluate_state(state, coeffs)
        p = recover_pressure(state, coeffs, ev)
        stress = TensorField.from_values(
            grid, ev.sigma_E.values + ev.sigma_L.values)
        f = divergence(truncate(stress)) - advect(state.u, state.u)
        resid = f - gradient(p)
        scale = max(f.max_norm(), 1e-30)
        assert divergence(resid).max_norm() <= 1e-10 * scale

    def test_zero_mean_gauge(self, grid, coeffs):
        state = random_small_state(grid, coeffs, epsilon=1e-2, seed=12)
        p = recover_pressure(state, coeffs)
        assert abs(p.mean()) <= 1e-14


class Test3D:
    def test_small_run_3d(self):
        grid = Grid((16, 16, 16))
        coeffs = default_nematic_coefficients(3)
        state = preset_state("random-small", grid, coeffs, epsilon=1e-2,
                             seed=13)
        cfg = SolverConfig(dt=1e-3, t_end=5e-3)
        res = run(state, coeffs, cfg)
        fin = res.final_state
        assert fin.constraint_violation() <= 1e-14
        assert np.all(np.isfinite(fin.u.values))
        scale = max(fin.u.max_norm(), 1e-30)
        assert divergence(fin.u).max_norm() <= 1e-10 * scale

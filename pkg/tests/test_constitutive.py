"""Material laws against hand/symbolically derived oracles.

The sin/cos director oracles below were derived independently with
symbolic differentiation before the implementation was written:
for n = (cos x1, sin x1),

    grad n = [[-sin x1, 0], [cos x1, 0]],   |grad n|^2 = 1,
    div n = -sin x1,  (n.grad)n = (-sin(2 x1)/2, cos^2 x1),
    tr{(grad n)^2} = sin^2 x1,   lap n = -n.
"""

import numpy as np
import pytest

from nemflow import constitutive as cst
from nemflow.coefficients import CoefficientSet, ThetaPoly
from nemflow.errors import (ConstitutiveInconsistencyError,
                            TemperaturePositivityError)
from nemflow.grid import (Grid, ScalarField, TensorField, VectorField,
                          gradient)


@pytest.fixture(scope="module")
def grid():
    return Grid((32, 32))


def coeff_set(grid, **overrides):
    data = dict(theta_ref=1.0, n_ref=[1.0, 0.0],
                alpha=[0.0] * 9, lambda1=0.0, lambda2=0.0,
                frank=[0.0, 0.0, 0.0, 0.0])
    data.update(overrides)
    return CoefficientSet(**data)


def unit_theta(grid, value=1.0):
    return ScalarField.from_values(grid, np.full(grid.shape, value))


def rotating_director(grid):
    """n = (cos x1, sin x1), exactly unit length."""
    x, _ = grid.coordinates()
    n = VectorField.from_values(grid, np.stack([np.cos(x), np.sin(x)]))
    return n, gradient(n)


def constant_director(grid, vec=(1.0, 0.0)):
    vals = np.zeros((grid.dim,) + grid.shape)
    for i, c in enumerate(vec):
        vals[i] = c
    n = VectorField.from_values(grid, vals)
    return n, gradient(n)


def random_unit_director(grid, seed):
    rng = np.random.default_rng(seed)
    x, y = grid.coordinates()
    ang = 0.5 * np.sin(x + rng.uniform(0, 2 * np.pi)) \
        + 0.3 * np.cos(2 * y + rng.uniform(0, 2 * np.pi))
    n = VectorField.from_values(grid, np.stack([np.cos(ang), np.sin(ang)]))
    return n, gradient(n)


def shear_velocity(grid, rate=1.0):
    """u = (rate * x2, 0); on the torus only grad_u matters, build it
    directly so the strain/vorticity oracle is exact."""
    G = np.zeros((2, 2) + grid.shape)
    G[0, 1] = rate
    return TensorField.from_values(grid, G)


class TestStrainVorticity:
    def test_shear(self, grid):
        D, Om = cst.strain_and_vorticity(shear_velocity(grid, rate=2.0))
        assert np.allclose(D.values[0, 1], 1.0)
        assert np.allclose(D.values[1, 0], 1.0)
        assert np.allclose(D.values[0, 0], 0.0)
        assert np.allclose(Om.values[0, 1], 1.0)
        assert np.allclose(Om.values[1, 0], -1.0)

    def test_zero(self, grid):
        D, Om = cst.strain_and_vorticity(TensorField.zeros(grid))
        assert D.max_norm() == 0.0 and Om.max_norm() == 0.0

    def test_irrotational(self, grid):
        f = ScalarField.from_values(
            grid, np.sin(grid.coordinates()[0] + grid.coordinates()[1]))
        u = gradient(f)
        _, Om = cst.strain_and_vorticity(gradient(u))
        assert Om.max_norm() <= 1e-12

    def test_split_sums_to_gradient(self, grid):
        rng = np.random.default_rng(0)
        G = TensorField.from_values(grid, rng.standard_normal((2, 2) + grid.shape))
        D, Om = cst.strain_and_vorticity(G)
        assert np.max(np.abs(D.values + Om.values - G.values)) <= 1e-14


class TestCorotationalFlux:
    def test_rigid_corotation(self, grid):
        n, grad_n = constant_director(grid)
        _, Om = cst.strain_and_vorticity(shear_velocity(grid))
        dn_dt = VectorField.from_values(
            grid, np.einsum("ij...,j...->i...", Om.values, n.values))
        N = cst.corotational_flux(dn_dt, VectorField.zeros(grid), grad_n, Om, n)
        assert N.max_norm() <= 1e-14

    def test_shear_on_constant_director(self, grid):
        # u = (gd x2, 0), n = e1: N = -Omega e1 = (0, gd/2)
        gd = 1.0
        n, grad_n = constant_director(grid)
        _, Om = cst.strain_and_vorticity(shear_velocity(grid, gd))
        N = cst.corotational_flux(VectorField.zeros(grid),
                                  VectorField.zeros(grid), grad_n, Om, n)
        assert np.allclose(N.values[0], 0.0, atol=1e-14)
        assert np.allclose(N.values[1], gd / 2, atol=1e-14)

    def test_reduces_to_dn_dt(self, grid):
        n, grad_n = constant_director(grid)
        rng = np.random.default_rng(1)
        dn_dt = VectorField.from_values(grid, rng.standard_normal((2,) + grid.shape))
        N = cst.corotational_flux(dn_dt, VectorField.zeros(grid), grad_n,
                                  TensorField.zeros(grid), n)
        assert np.max(np.abs(N.values - dn_dt.values)) <= 1e-14


class TestElasticEnergy:
    def test_constant_director_zero(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 2.0, 3.0, 4.0])
        W = cst.oseen_frank_energy(unit_theta(grid), n, grad_n, c)
        assert W.max_norm() <= 1e-13

    def test_one_constant_rotating(self, grid):
        n, grad_n = rotating_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        W = cst.oseen_frank_energy(unit_theta(grid), n, grad_n, c)
        assert np.allclose(W.values, 0.5, atol=1e-12)

    def test_k4_only_rotating(self, grid):
        # symbolic oracle: tr{(grad n)^2} = sin^2 x1
        n, grad_n = rotating_director(grid)
        c = coeff_set(grid, frank=[0.0, 0.0, 0.0, 2.0])
        W = cst.oseen_frank_energy(unit_theta(grid), n, grad_n, c)
        x, _ = grid.coordinates()
        assert np.max(np.abs(W.values - np.sin(x) ** 2)) <= 1e-12

    def test_temperature_positivity(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        with pytest.raises(TemperaturePositivityError):
            cst.oseen_frank_energy(unit_theta(grid, -1.0), n, grad_n, c)


class TestMolecularField:
    def test_one_constant_is_minus_laplacian(self, grid):
        n, grad_n = rotating_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        h = cst.molecular_field(unit_theta(grid), n, grad_n, c)
        assert np.max(np.abs(h.values - n.values)) <= 1e-11

    def test_constant_director(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 1.0, 1.0, 1.0])
        h = cst.molecular_field(unit_theta(grid), n, grad_n, c)
        assert h.max_norm() <= 1e-12

    def test_k2_with_divfree_director(self, grid):
        # n = (cos(x2), sin(... need div n = 0: n depending on x2 only in
        # first component: n = (sin x2, cos ... use n = (cos a(x2), sin a(x2))?
        # div n = d1 n1 + d2 n2; choose n = (f(x2), g(x2)) unit with g' = 0:
        # rotate frame: n = (sin(x2), c)? not unit. Use n = (cos a, sin a)
        # with a = a(x1) gives div n = -sin(a) a'.  For div n = 0 take
        # a = a(x2) in the SECOND component slot: n = (sin a(x2), cos a(x2)):
        # div n = d2 n2 = -sin(a) a' != 0.  Instead n = (cos a(x2), sin a(x2)):
        # div n = d2(sin a) = cos(a) a' != 0.  A clean div-free unit field:
        # n = (cos a, sin a) with grad a parallel to (-sin a? ...) -- just use
        # the rotating director whose div = -sin x1 and check the variational
        # derivative of (div n)^2 vanishes where div n = 0 is replaced by the
        # constant director (trivially div-free).
        n, grad_n = constant_director(grid, (0.0, 1.0))
        c = coeff_set(grid, n_ref=[0.0, 1.0], frank=[0.0, 1.0, 0.0, 0.0])
        h = cst.molecular_field(unit_theta(grid), n, grad_n, c)
        assert h.max_norm() <= 1e-12

    def test_energy_consistency_finite_difference(self, grid):
        """Directional FD of the elastic energy matches int(h . dn) to O(step^2).

        The perturbation deliberately breaks parity so the cubic term of
        the quartic K3 invariant does not vanish by symmetry.
        """
        x, y = grid.coordinates()
        ang = 0.5 * np.sin(x + 0.3) + 0.3 * np.cos(2 * y + 1.1) \
            + 0.2 * np.sin(x + y + 0.7)
        n = VectorField.from_values(grid, np.stack([np.cos(ang), np.sin(ang)]))
        grad_n = gradient(n)
        c = coeff_set(grid, frank=[1.0, 0.7, 0.5, 0.3])
        theta = unit_theta(grid)
        h = cst.molecular_field(theta, n, grad_n, c)
        dn = np.stack([np.sin(x + 1.0) * np.cos(y + 0.4) + 0.3 * np.cos(y + 2.2),
                       np.cos(2 * x + 0.9) * np.sin(y) + 0.5 * np.sin(x + 0.1)])

        def energy(nv):
            f = VectorField.from_values(grid, nv)
            return cst.oseen_frank_energy(theta, f, gradient(f), c).integral()

        pairing = ScalarField.from_values(
            grid, np.einsum("i...,i...->...", h.values, dn)).integral()
        gaps = []
        for step in (2e-2, 1e-2):
            fd = (energy(n.values + step * dn)
                  - energy(n.values - step * dn)) / (2 * step)
            gaps.append(abs(fd - pairing))
        # O(step^2): gap quarters when the step halves
        assert gaps[1] <= 0.3 * gaps[0] + 1e-12
        assert gaps[0] <= 10.0 * (2e-2) ** 2


class TestLagrangeMultiplier:
    def test_one_constant_rotating(self, grid):
        n, grad_n = rotating_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        h = cst.molecular_field(unit_theta(grid), n, grad_n, c)
        beta = cst.lagrange_multiplier(h, n)
        assert np.allclose(beta.values, 1.0, atol=1e-11)

    def test_orthogonal_and_constant(self, grid):
        n, _ = constant_director(grid)
        h = VectorField.from_values(
            grid, np.stack([np.zeros(grid.shape), np.ones(grid.shape)]))
        assert cst.lagrange_multiplier(h, n).max_norm() <= 1e-15
        assert cst.lagrange_multiplier(VectorField.zeros(grid), n).max_norm() == 0


class TestEricksenStress:
    def test_constant_director(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 1.0, 1.0, 1.0])
        sig = cst.ericksen_stress(unit_theta(grid), n, grad_n, c)
        assert sig.max_norm() <= 1e-13

    def test_one_constant_rotating(self, grid):
        n, grad_n = rotating_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        sig = cst.ericksen_stress(unit_theta(grid), n, grad_n, c)
        assert np.allclose(sig.values[0, 0], -1.0, atol=1e-12)
        for i, j in ((0, 1), (1, 0), (1, 1)):
            assert np.max(np.abs(sig.values[i, j])) <= 1e-12

    def test_conjugate_tensor_finite_difference(self, grid):
        """dW/d(grad n) matches pointwise FD of W in the gradient entries."""
        n, grad_n = random_unit_director(grid, 6)
        c = coeff_set(grid, frank=[1.0, 0.7, 0.5, 0.3])
        theta = unit_theta(grid)
        phi = cst.elastic_stress_conjugate(theta, n, grad_n, c).values

        def W_of(Gv):
            return cst.oseen_frank_energy(
                theta, n, TensorField.from_values(grid, Gv), c).values

        step = 1e-6
        for i in range(2):
            for j in range(2):
                Gp = grad_n.values.copy()
                Gm = grad_n.values.copy()
                Gp[i, j] = Gp[i, j] + step
                Gm[i, j] = Gm[i, j] - step
                fd = (W_of(Gp) - W_of(Gm)) / (2 * step)
                assert np.max(np.abs(fd - phi[i, j])) <= 1e-6


class TestLeslieStress:
    def test_zero_inputs(self, grid):
        n, _ = constant_director(grid)
        c = coeff_set(grid, alpha=[1.0] * 9)
        sig = cst.leslie_stress(unit_theta(grid), n, VectorField.zeros(grid),
                                TensorField.zeros(grid), c, compressible=True)
        assert sig.max_norm() <= 1e-15

    def test_isotropic(self, grid):
        n, _ = constant_director(grid)
        alpha = [0.0] * 9
        alpha[4] = 2.5
        c = coeff_set(grid, alpha=alpha)
        rng = np.random.default_rng(2)
        Dv = rng.standard_normal((2, 2) + grid.shape)
        Dv = 0.5 * (Dv + np.swapaxes(Dv, 0, 1))
        D = TensorField.from_values(grid, Dv)
        sig = cst.leslie_stress(unit_theta(grid), n, VectorField.zeros(grid), D, c)
        assert np.max(np.abs(sig.values - 2.5 * Dv)) <= 1e-13

    def test_alpha2_outer_product(self, grid):
        # alpha2 N x n with N = (0,1), n = (1,0): single entry (2,1)
        n, _ = constant_director(grid, (1.0, 0.0))
        alpha = [0.0] * 9
        alpha[2] = 3.0
        c = coeff_set(grid, alpha=alpha)
        N = VectorField.from_values(
            grid, np.stack([np.zeros(grid.shape), np.ones(grid.shape)]))
        sig = cst.leslie_stress(unit_theta(grid), n, N, TensorField.zeros(grid), c)
        assert np.allclose(sig.values[1, 0], 3.0)
        for i, j in ((0, 0), (0, 1), (1, 1)):
            assert np.max(np.abs(sig.values[i, j])) <= 1e-15


class TestKinematicTransport:
    def test_zero(self, grid):
        n, _ = constant_director(grid)
        c = coeff_set(grid, alpha=[0, 0, -1.0, 0.5, 1.0, 0.2, 0.4, 0, 0])
        g = cst.kinematic_transport(unit_theta(grid), n, VectorField.zeros(grid),
                                    TensorField.zeros(grid), c)
        assert g.max_norm() <= 1e-15

    def test_gamma1_only_returns_N(self, grid):
        n, _ = constant_director(grid)
        alpha = [0.0] * 9
        alpha[3] = 1.0  # gamma1 = 1, gamma2 = 0
        c = coeff_set(grid, alpha=alpha)
        N = VectorField.from_values(
            grid, np.stack([np.zeros(grid.shape), np.ones(grid.shape)]))
        g = cst.kinematic_transport(unit_theta(grid), n, N,
                                    TensorField.zeros(grid), c)
        assert np.max(np.abs(g.values - N.values)) <= 1e-15

    @pytest.mark.parametrize("seed", range(8))
    def test_orthogonality_and_route_agreement(self, grid, seed):
        rng = np.random.default_rng(seed)
        n, _ = random_unit_director(grid, seed)
        alpha = rng.standard_normal(9)
        c = coeff_set(grid, alpha=list(alpha))
        Nv = rng.standard_normal((2,) + grid.shape)
        Nv -= np.einsum("i...,i...->...", Nv, n.values) * n.values
        N = VectorField.from_values(grid, Nv)
        Dv = rng.standard_normal((2, 2) + grid.shape)
        Dv = 0.5 * (Dv + np.swapaxes(Dv, 0, 1))
        D = TensorField.from_values(grid, Dv)
        g = cst.kinematic_transport(unit_theta(grid), n, N, D, c, verify=True)
        dot = np.einsum("i...,i...->...", g.values, n.values)
        assert np.max(np.abs(dot)) <= 1e-12 * max(1.0, g.max_norm())

    def test_route_disagreement_raises(self, grid):
        # break N.n = 0: the two routes then differ by gamma1 (N.n) n
        n, _ = constant_director(grid)
        alpha = [0.0] * 9
        alpha[3] = 1.0
        c = coeff_set(grid, alpha=alpha)
        N = VectorField.from_values(
            grid, np.stack([np.ones(grid.shape), np.ones(grid.shape)]))
        with pytest.raises(ConstitutiveInconsistencyError):
            cst.kinematic_transport(unit_theta(grid), n, N,
                                    TensorField.zeros(grid), c, verify=True)


class TestHeatFlux:
    def test_zero_gradient(self, grid):
        n, _ = constant_director(grid)
        c = coeff_set(grid, lambda1=1.0, lambda2=1.0)
        q = cst.heat_flux(unit_theta(grid), VectorField.zeros(grid), n, c)
        assert q.max_norm() == 0.0

    def test_fourier_law(self, grid):
        n, _ = constant_director(grid)
        c = coeff_set(grid, lambda1=1.0)
        gt = VectorField.from_values(
            grid, np.stack([np.ones(grid.shape), 2 * np.ones(grid.shape)]))
        q = cst.heat_flux(unit_theta(grid), gt, n, c)
        assert np.max(np.abs(q.values - gt.values)) <= 1e-15

    def test_director_projection(self, grid):
        n, _ = constant_director(grid, (1.0, 0.0))
        c = coeff_set(grid, lambda1=0.0, lambda2=1.0)
        gt = VectorField.from_values(
            grid, np.stack([3 * np.ones(grid.shape), 7 * np.ones(grid.shape)]))
        q = cst.heat_flux(unit_theta(grid), gt, n, c)
        assert np.allclose(q.values[0], 3.0)
        assert np.allclose(q.values[1], 0.0)


class TestEntropyAndEnergy:
    def test_uniform_director(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        theta = ScalarField.from_values(
            grid, 2.0 + 0.1 * np.sin(grid.coordinates()[0]))
        eta = cst.entropy(theta, n, grad_n, c)
        assert np.max(np.abs(eta.values - (1 + np.log(theta.values)))) <= 1e-13

    def test_theta_one(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        eta = cst.entropy(unit_theta(grid), n, grad_n, c)
        assert np.allclose(eta.values, 1.0, atol=1e-14)

    def test_temperature_dependent_frank(self, grid):
        # K1 = c1 * (theta - theta_ref): dW/dtheta = c1 |grad n|^2 / 2
        n, grad_n = rotating_director(grid)
        c = coeff_set(grid, frank=[ThetaPoly((0.0, 0.7)), 0.0, 0.0, 0.0])
        theta = unit_theta(grid, 1.5)
        eta = cst.entropy(theta, n, grad_n, c)
        expected = 1 + np.log(1.5) - 0.5 * 0.7 * 1.0  # |grad n|^2 = 1
        assert np.allclose(eta.values, expected, atol=1e-12)

    def test_total_energy_uniform(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        e = cst.total_energy(VectorField.zeros(grid), unit_theta(grid), n,
                             grad_n, c)
        assert np.allclose(e.values, 1.0, atol=1e-14)

    def test_kinetic_term(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0.0, 0.0, 0.0])
        u = VectorField.from_values(
            grid, np.stack([np.ones(grid.shape), np.ones(grid.shape)]))
        e = cst.total_energy(u, unit_theta(grid), n, grad_n, c)
        assert np.allclose(e.values, 2.0, atol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_internal_energy_identity(self, grid, seed):
        """F + theta*eta equals theta + W - theta dW/dtheta."""
        n, grad_n = random_unit_director(grid, seed)
        c = coeff_set(grid, frank=[ThetaPoly((1.0, 0.2)), ThetaPoly((0.5, -0.1)),
                                   0.3, ThetaPoly((0.1, 0.05))])
        rng = np.random.default_rng(seed)
        theta = ScalarField.from_values(
            grid, 1.0 + 0.3 * np.sin(grid.coordinates()[0] + rng.uniform(0, 6)))
        F = cst.free_energy(theta, n, grad_n, c).values
        eta = cst.entropy(theta, n, grad_n, c).values
        direct = F + theta.values * eta
        simplified = cst.internal_energy(theta, n, grad_n, c).values
        assert np.max(np.abs(direct - simplified)) <= 1e-12 * max(
            1.0, np.max(np.abs(direct)))


class TestEntropyProduction:
    def test_quiescent(self, grid):
        n, _ = constant_director(grid)
        c = coeff_set(grid, alpha=[0, 0, -1.0, 0.5, 1.0, 0, 0, 0, 0],
                      lambda1=1.0)
        prod = cst.entropy_production(unit_theta(grid), VectorField.zeros(grid),
                                      n, VectorField.zeros(grid),
                                      TensorField.zeros(grid), c)
        assert prod.max_norm() == 0.0

    def test_isotropic_shear(self, grid):
        # alpha4 only, shear rate gd: theta*Delta = alpha4 gd^2 / 2
        gd = 1.4
        n, _ = constant_director(grid)
        alpha = [0.0] * 9
        alpha[4] = 2.0
        c = coeff_set(grid, alpha=alpha)
        D, _ = cst.strain_and_vorticity(shear_velocity(grid, gd))
        prod = cst.entropy_production(unit_theta(grid), VectorField.zeros(grid),
                                      n, VectorField.zeros(grid), D, c)
        assert np.allclose(prod.values, 2.0 * gd**2 / 2, atol=1e-13)

    def test_heat_term(self, grid):
        n, _ = constant_director(grid)
        c = coeff_set(grid, lambda1=1.0)
        gt = VectorField.from_values(
            grid, np.stack([np.ones(grid.shape), np.zeros(grid.shape)]))
        prod = cst.entropy_production(unit_theta(grid), gt, n,
                                      VectorField.zeros(grid),
                                      TensorField.zeros(grid), c)
        assert np.allclose(prod.values, 1.0, atol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_quadratic_homogeneity(self, grid, seed):
        """Doubling (N, D) quadruples the mechanical dissipation when the
        coefficients are temperature independent."""
        rng = np.random.default_rng(seed)
        n, _ = random_unit_director(grid, seed)
        c = coeff_set(grid, alpha=list(rng.standard_normal(9)))
        Nv = rng.standard_normal((2,) + grid.shape)
        Nv -= np.einsum("i...,i...->...", Nv, n.values) * n.values
        Dv = rng.standard_normal((2, 2) + grid.shape)
        Dv = 0.5 * (Dv + np.swapaxes(Dv, 0, 1))
        one = cst.viscous_dissipation(
            unit_theta(grid), n, VectorField.from_values(grid, Nv),
            TensorField.from_values(grid, Dv), c).values
        two = cst.viscous_dissipation(
            unit_theta(grid), n, VectorField.from_values(grid, 2 * Nv),
            TensorField.from_values(grid, 2 * Dv), c).values
        assert np.max(np.abs(two - 4 * one)) <= 1e-11 * max(1.0, np.max(np.abs(one)))

    @pytest.mark.parametrize("seed", range(4))
    def test_g_dot_N_identity(self, grid, seed):
        """g.N = gamma1 |N|^2 + gamma2 N.(Dn) whenever N.n = 0."""
        rng = np.random.default_rng(seed + 50)
        n, _ = random_unit_director(grid, seed + 50)
        c = coeff_set(grid, alpha=list(rng.standard_normal(9)))
        Nv = rng.standard_normal((2,) + grid.shape)
        Nv -= np.einsum("i...,i...->...", Nv, n.values) * n.values
        Dv = rng.standard_normal((2, 2) + grid.shape)
        Dv = 0.5 * (Dv + np.swapaxes(Dv, 0, 1))
        N = VectorField.from_values(grid, Nv)
        D = TensorField.from_values(grid, Dv)
        g = cst.kinematic_transport(unit_theta(grid), n, N, D, c)
        lhs = np.einsum("i...,i...->...", g.values, Nv)
        Dn = np.einsum("ij...,j...->i...", Dv, n.values)
        gamma1 = c.gamma1_at(1.0)
        gamma2 = c.gamma2_at(1.0)
        rhs = gamma1 * np.einsum("i...,i...->...", Nv, Nv) \
            + gamma2 * np.einsum("i...,i...->...", Nv, Dn)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))


class TestWorkFlux:
    def test_static(self, grid):
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0, 0, 0], alpha=[0, 0, -1, 0.5, 1, 0, 0, 0, 0])
        sig = cst.work_flux(VectorField.zeros(grid), unit_theta(grid), n,
                            VectorField.zeros(grid), grad_n,
                            ScalarField.zeros(grid), c)
        assert sig.max_norm() <= 1e-14

    def test_pure_pressure(self, grid):
        # static director, uniform motionless state except pressure: -p u
        n, grad_n = constant_director(grid)
        c = coeff_set(grid, frank=[1.0, 0, 0, 0])
        x, _ = grid.coordinates()
        p = ScalarField.from_values(grid, np.sin(x))
        uv = np.stack([np.ones(grid.shape), np.zeros(grid.shape)])
        u = VectorField.from_values(grid, uv)
        sig = cst.work_flux(u, unit_theta(grid), n, VectorField.zeros(grid),
                            grad_n, p, c)
        # T u = -p u; u e_tot = u (theta + |u|^2/2) = 1.5 u
        expected0 = -p.values - 1.5
        assert np.max(np.abs(sig.values[0] - expected0)) <= 1e-12
        assert np.max(np.abs(sig.values[1])) <= 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_divergence_integrates_to_zero(self, grid, seed):
        from nemflow.grid import divergence
        rng = np.random.default_rng(seed)
        n, grad_n = random_unit_director(grid, seed)
        c = coeff_set(grid, frank=[1.0, 0.5, 0.3, 0.1],
                      alpha=list(rng.standard_normal(9)), lambda1=1.0)
        u = VectorField.from_values(grid, rng.standard_normal((2,) + grid.shape))
        dn_dt = VectorField.from_values(grid, rng.standard_normal((2,) + grid.shape))
        p = ScalarField.from_values(grid, rng.standard_normal(grid.shape))
        theta = ScalarField.from_values(
            grid, 1.0 + 0.2 * np.cos(grid.coordinates()[1]))
        sig = cst.work_flux(u, theta, n, dn_dt, grad_n, p, c)
        assert abs(divergence(sig).integral()) <= 1e-12 * max(1.0, sig.max_norm())

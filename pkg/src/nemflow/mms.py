"""Manufactured solutions: prescribed smooth trajectories with the forcing
that makes them solve the full semi-discrete system.

The prescribed fields are low-mode trigonometric polynomials with
analytic time profiles; the forcing at time t is

    forcing = d/dt x*(t) - [L x*(t) + F(x*(t))]

with L the assembled implicit symbols and F the explicit residual, so
the exact trajectory satisfies the forced equations to spectral accuracy
and any remaining solver error is pure time discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet
from .grid import Grid, ScalarField, VectorField, leray_project
from .initial_data import tilt_to_director
from .solver import (LinearOperators, Rates, SimState, rhs_nonlinear)


@dataclass(frozen=True)
class ManufacturedSolution:
    """u from a rocking streamfunction, tilted director, warm patch."""

    grid: Grid
    coeffs: CoefficientSet
    epsilon: float = 1e-2

    def _profiles(self, t):
        a = self.epsilon * (1.0 + 0.5 * np.sin(2.0 * t))
        b = 0.5 * self.epsilon * np.cos(t)
        c = self.epsilon * (1.0 + 0.5 * np.cos(3.0 * t))
        da = self.epsilon * np.cos(2.0 * t)
        db = -0.5 * self.epsilon * np.sin(t)
        dc = -1.5 * self.epsilon * np.sin(3.0 * t)
        return (a, b, c), (da, db, dc)

    def _shapes(self):
        x = self.grid.coordinates()
        u_shape = np.stack([-np.cos(x[0]) * np.sin(x[1]),
                            np.sin(x[0]) * np.cos(x[1])]
                           + [np.zeros(self.grid.shape)]
                           * (self.grid.dim - 2))
        tilt_shape = np.sin(x[0] + 0.3)
        theta_shape = np.cos(x[0] + 0.1) * np.cos(x[1] - 0.2)
        return u_shape, tilt_shape, theta_shape

    def state(self, t: float) -> SimState:
        (a, b, c), _ = self._profiles(t)
        u_shape, tilt_shape, theta_shape = self._shapes()
        u = VectorField.from_values(self.grid, a * u_shape)
        n = tilt_to_director(self.grid, self.coeffs.n_ref, b * tilt_shape)
        theta = ScalarField.from_values(
            self.grid, self.coeffs.theta_ref + c * theta_shape)
        return SimState(t=t, u=u, n=n, theta=theta)

    def rates(self, t: float) -> tuple[VectorField, VectorField, ScalarField]:
        """Exact (du/dt, dn/dt, dtheta/dt) at time t."""
        (a, b, c), (da, db, dc) = self._profiles(t)
        u_shape, tilt_shape, theta_shape = self._shapes()
        du = VectorField.from_values(self.grid, da * u_shape)
        # director angle phi = base + b*shape: dn/dt = db*shape * J n
        state_n = tilt_to_director(self.grid, self.coeffs.n_ref,
                                   b * tilt_shape).values
        dn_vals = np.zeros_like(state_n)
        if self.grid.dim == 2:
            dn_vals[0] = -state_n[1] * db * tilt_shape
            dn_vals[1] = state_n[0] * db * tilt_shape
        else:
            n_ref = np.asarray(self.coeffs.n_ref)
            trial = np.zeros(3)
            trial[int(np.argmin(np.abs(n_ref)))] = 1.0
            partner = trial - (trial @ n_ref) * n_ref
            partner /= np.linalg.norm(partner)
            ang = b * tilt_shape
            for i in range(3):
                dn_vals[i] = (-np.sin(ang) * n_ref[i]
                              + np.cos(ang) * partner[i]) * db * tilt_shape
        dn = VectorField.from_values(self.grid, dn_vals)
        dth = ScalarField.from_values(self.grid, dc * theta_shape)
        return du, dn, dth

    def forcing(self, coeffs: CoefficientSet, ops: LinearOperators):
        """Callable t -> (F_u, F_n, F_theta) completing the equations."""

        def force(t):
            state = self.state(t)
            du, dn, dth = self.rates(t)
            res = rhs_nonlinear(state, coeffs, ops, Rates(dtheta_dt=dth))
            grid = self.grid
            # linear parts at the exact state
            lin_u = np.einsum("...ij,j...->i...", ops.velocity, state.u.hat)
            zero_idx = (Ellipsis,) + (0,) * grid.dim
            m_hat = state.n.hat.copy()
            m_hat[zero_idx] -= np.asarray(coeffs.n_ref) * grid.npoints
            lin_n = np.einsum("...ij,j...->i...", ops.director, m_hat)
            om_hat = state.theta.hat.copy()
            om_hat[(0,) * grid.dim] -= coeffs.theta_ref * grid.npoints
            lin_th = ops.thermal * om_hat
            F_u = VectorField.from_hat(
                grid, leray_project(du).hat - lin_u - res.F_u.hat)
            F_n = VectorField.from_hat(grid, dn.hat - lin_n - res.F_n.hat)
            F_th = ScalarField.from_hat(grid,
                                        dth.hat - lin_th - res.F_theta.hat)
            return F_u, F_n, F_th

        return force

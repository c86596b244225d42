"""Time integration of the incompressible non-isothermal director system.

Unknowns (u, n, theta) evolve by

* momentum:  d/dt u + u.grad u = P div[sigma^E + sigma^L]   (P = Leray),
* director:  gamma1(theta) N + gamma2(theta)[Dn - (n.Dn)n] + h = (h.n) n,
  solved for d/dt n (division by gamma1 guarded by a positive floor),
* temperature:  d/dt theta + u.grad theta
      = theta * Dt[dW/dtheta] + div q + sigma^L:D + g.N.

The frozen-coefficient linear operators (velocity block after Leray
projection, anisotropic heat operator, elastic director operator divided
by gamma1 at the reference temperature) are treated implicitly per
Fourier mode; every nonlinear residual is evaluated explicitly with
dealiased products.  One backward-Euler IMEX step is the default scheme;
the Picard scheme re-solves the same slab with residuals frozen at the
previous iterate until the iterate difference (measured in the
intersection shell norms the well-posedness theory tracks) contracts
below tolerance.

The material derivative of dW/dtheta is expanded by the chain rule with
the freshly computed director rate and the temperature rate of the
previous step (IMEX) or previous iterate (Picard), which keeps the
temperature update mode-diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import constitutive as cst
from .besov import intersection_norm
from .coefficients import CoefficientSet
from .errors import (BlowUpError, EllipticityError, PicardNonConvergenceError,
                     TemperaturePositivityError)
from .grid import (Grid, ScalarField, TensorField, VectorField, advect,
                   divergence, gradient, leray_project, truncate)

SUBSYSTEMS = ("full", "heat-only", "stokes-only")
SCHEMES = ("imex1", "picard")


# ---------------------------------------------------------------------------
# state and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimState:
    """Instantaneous solver state (pressure is a diagnostic side product)."""

    t: float
    u: VectorField
    n: VectorField
    theta: ScalarField
    p: ScalarField | None = None

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def constraint_violation(self) -> float:
        nsq = np.einsum("i...,i...->...", self.n.values, self.n.values)
        return float(np.max(np.abs(nsq - 1.0)))

    def validate(self, div_tol: float = 1e-10, constraint_tol: float = 1e-8,
                 theta_min: float = 0.0) -> None:
        for name, f in (("u", self.u), ("n", self.n), ("theta", self.theta)):
            if not np.all(np.isfinite(f.values)):
                raise BlowUpError(f"non-finite values in {name}")
        scale = max(self.u.max_norm(), 1e-30)
        if divergence(self.u).max_norm() > div_tol * scale:
            raise ValueError("velocity is not divergence-free")
        if self.constraint_violation() > constraint_tol:
            raise ValueError("director is not unit length")
        if float(self.theta.values.min()) <= theta_min:
            raise TemperaturePositivityError(
                f"temperature {self.theta.values.min():.6g} at or below the "
                f"floor {theta_min:.6g}")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "imex1"
    picard_max_iters: int = 30
    picard_tol: float = 1e-10
    renormalize_director: bool = True
    snapshot_stride: int = 10
    diag_stride: int = 1
    seed: int = 0
    theta_min: float | None = None  # defaults to theta_ref / 10
    gamma_min: float = 1e-8
    constraint_tol: float = 1e-8
    subsystem: str = "full"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.subsystem not in SUBSYSTEMS:
            raise ValueError(f"subsystem must be one of {SUBSYSTEMS}")

    def resolved_theta_min(self, coeffs: CoefficientSet) -> float:
        return (coeffs.theta_ref / 10.0 if self.theta_min is None
                else self.theta_min)


# ---------------------------------------------------------------------------
# frozen-coefficient operators
# ---------------------------------------------------------------------------


@dataclass
class LinearOperators:
    """Per-mode symbols of the implicit operators (negative semidefinite)."""

    grid: Grid
    velocity: np.ndarray        # (*spec, d, d), Leray-projected
    thermal: np.ndarray         # (*spec,)
    director: np.ndarray        # (*spec, d, d), already divided by gamma1_bar
    _solver_cache: dict = field(default_factory=dict)

    def solvers_for(self, dt: float):
        """(velocity inverse, thermal inverse, director inverse) for
        (I - dt * symbol); cached per dt."""
        key = float(dt)
        if key not in self._solver_cache:
            d = self.grid.dim
            eye = np.eye(d)
            inv_u = np.linalg.inv(eye - dt * self.velocity)
            inv_th = 1.0 / (1.0 - dt * self.thermal)
            inv_n = np.linalg.inv(eye - dt * self.director)
            self._solver_cache[key] = (inv_u, inv_th, inv_n)
        return self._solver_cache[key]


def _leray_symbol(grid: Grid) -> np.ndarray:
    k = np.moveaxis(grid.wavenumbers, 0, -1)  # (*spec, d)
    k2 = grid.k_squared
    P = np.zeros(grid.spectral_shape + (grid.dim, grid.dim))
    P[...] = np.eye(grid.dim)
    nz = k2 > 0
    kk = k[..., :, None] * k[..., None, :]
    P[nz] -= kk[nz] / k2[nz][..., None, None]
    return P


def _velocity_symbol(coeffs: CoefficientSet, grid: Grid) -> np.ndarray:
    """div sigma^L(theta_ref, n_ref, -Omega n_ref, D) as a matrix per mode,
    assembled column by column through the stress formula itself."""
    d = grid.dim
    k = np.moveaxis(grid.wavenumbers, 0, -1)  # (*spec, d)
    nbar = coeffs.n_ref_vector
    a = coeffs.alpha_bar
    A = np.zeros(grid.spectral_shape + (d, d), dtype=complex)
    for m in range(d):
        e = np.zeros(d)
        e[m] = 1.0
        # grad u symbol for u = e: (i k_j e_i)
        Gu = 1j * e[None, :, None] * k[..., None, :]
        Gu = np.broadcast_to(Gu, grid.spectral_shape + (d, d))
        D = 0.5 * (Gu + np.swapaxes(Gu, -1, -2))
        Om = 0.5 * (Gu - np.swapaxes(Gu, -1, -2))
        N = -np.einsum("...ij,j->...i", Om, nbar)
        Dn = np.einsum("...ij,j->...i", D, nbar)
        nDn = np.einsum("i,...i->...", nbar, Dn)
        nn = np.outer(nbar, nbar)
        sig = (a[1] * nDn[..., None, None] * nn
               + a[2] * N[..., :, None] * nbar[None, :]
               + a[3] * nbar[:, None] * N[..., None, :]
               + a[4] * D
               + a[5] * Dn[..., :, None] * nbar[None, :]
               + a[6] * nbar[:, None] * Dn[..., None, :])
        A[..., m] = np.einsum("...ij,...j->...i", 1j * sig, k)
    out = np.real(A)
    P = _leray_symbol(grid)
    return np.einsum("...ij,...jk,...kl->...il", P, out, P)


def _thermal_symbol(coeffs: CoefficientSet, grid: Grid) -> np.ndarray:
    l1, l2 = coeffs.lambda_bar
    ndotk = np.tensordot(coeffs.n_ref_vector, grid.wavenumbers, axes=1)
    return -(l1 * grid.k_squared + l2 * ndotk**2)


def _director_symbol(coeffs: CoefficientSet, grid: Grid) -> np.ndarray:
    """K1 lap + (K2+K4)(Id + n x n) grad div + K3 div[(n.grad .) x n],
    divided by gamma1 at the reference temperature."""
    d = grid.dim
    k = np.moveaxis(grid.wavenumbers, 0, -1)
    nbar = coeffs.n_ref_vector
    K1, K2, K3, K4 = coeffs.frank_bar
    k2 = grid.k_squared
    ndotk = np.tensordot(nbar, grid.wavenumbers, axes=1)
    eye = np.eye(d)
    sym = (-K1 * k2[..., None, None] * eye
           - K3 * (ndotk**2)[..., None, None] * eye)
    kk = k[..., :, None] * k[..., None, :]
    nk = nbar[:, None] * k[..., None, :]
    sym = sym - (K2 + K4) * (kk + ndotk[..., None, None] * nk)
    gamma1_bar = coeffs.gamma1_bar
    if gamma1_bar <= 0:
        raise EllipticityError("gamma1(theta_ref) must be positive")
    return sym / gamma1_bar


def assemble_linear_operators(coeffs: CoefficientSet, grid: Grid
                              ) -> LinearOperators:
    return LinearOperators(
        grid=grid,
        velocity=_velocity_symbol(coeffs, grid),
        thermal=_thermal_symbol(coeffs, grid),
        director=_director_symbol(coeffs, grid),
    )


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    margins: dict
    coercivity: dict  # numeric lambda0 per operator

    def failures(self) -> list:
        return [k for k, v in self.margins.items() if v <= 0] + [
            f"coercivity:{k}" for k, v in self.coercivity.items() if v <= 0]


def check_ellipticity(coeffs: CoefficientSet, grid: Grid | None = None,
                      gamma_min: float = 1e-8,
                      theta_band: tuple[float, float] | None = None
                      ) -> EllipticityReport:
    """Closed-form margins plus numeric coercivity of the assembled symbols.

    Margins: K1_bar > 0; K1_bar - 2(K2_bar+K4_bar) - K3_bar > 0;
    lambda1_bar > 0; lambda1_bar + lambda2_bar > 0; alpha4_bar > 0;
    min gamma1(theta) - gamma_min >= 0 over the run's temperature band
    (default [theta_ref/10, 19 theta_ref/10]).  Coercivity: for each
    operator, min over modes of -lambda_max(sym symbol)/|k|^2 (velocity
    restricted to the divergence-free subspace), required positive.
    """
    K1, K2, K3, K4 = coeffs.frank_bar
    l1, l2 = coeffs.lambda_bar
    margins = {
        "frank_K1": K1,
        "frank_gap": K1 - 2 * (K2 + K4) - K3,
        "heat_lambda1": l1,
        "heat_lambda_sum": l1 + l2,
        "alpha4": coeffs.alpha_bar[4],
    }
    if theta_band is None:
        lo = coeffs.theta_ref / 10.0
        theta_band = (lo, 2 * coeffs.theta_ref - lo)
    thetas = np.linspace(theta_band[0], theta_band[1], 101)
    margins["gamma1_band"] = float(np.min(coeffs.gamma1_at(thetas))) - gamma_min

    if grid is None:
        dim = len(coeffs.n_ref)
        grid = Grid((8,) * dim)
    ops = None
    coercivity = {}
    if all(v > 0 for v in margins.values()):
        ops = assemble_linear_operators(coeffs, grid)
        k2 = grid.k_squared
        nz = k2 > 0

        def min_ratio_matrix(sym: np.ndarray, projected: bool) -> float:
            s = 0.5 * (sym + np.swapaxes(sym, -1, -2))
            eigs = np.linalg.eigvalsh(s)
            # projected symbols carry one exact-zero kernel eigenvalue
            lmax = eigs[..., -2] if projected else eigs[..., -1]
            return float(np.min(-lmax[nz] / k2[nz]))

        coercivity["velocity"] = min_ratio_matrix(ops.velocity, True)
        coercivity["thermal"] = float(np.min(-ops.thermal[nz] / k2[nz]))
        coercivity["director"] = min_ratio_matrix(
            ops.director * coeffs.gamma1_bar, False)
    else:
        coercivity = {"velocity": float("nan"), "thermal": float("nan"),
                      "director": float("nan")}
    passed = all(v > 0 for v in margins.values()) and all(
        np.isfinite(v) and v > 0 for v in coercivity.values())
    return EllipticityReport(passed=passed, margins=margins,
                             coercivity=coercivity)


# ---------------------------------------------------------------------------
# constitutive evaluation of a state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateEvaluation:
    """Shared derived fields of one state (all pure functions of it)."""

    grad_u: TensorField
    D: TensorField
    Omega: TensorField
    grad_n: TensorField
    grad_theta: VectorField
    h: VectorField
    beta: ScalarField
    N: VectorField
    dn_dt: VectorField
    sigma_E: TensorField
    sigma_L: TensorField
    g: VectorField
    q: VectorField
    dissipation: ScalarField            # sigma^L : D + g.N
    dissipation_identity_gap: float     # vs gamma1|N|^2 + gamma2 N.Dn
    entropy_production: ScalarField     # dissipation + q.grad(theta)/theta


def evaluate_state(state: SimState, coeffs: CoefficientSet,
                   gamma_min: float = 1e-8) -> StateEvaluation:
    grid = state.grid
    theta, n, u = state.theta, state.n, state.u
    th = theta.values
    if np.any(th <= 0):
        raise TemperaturePositivityError(
            f"temperature reached {th.min():.6g}")
    grad_u = gradient(u)
    D, Om = cst.strain_and_vorticity(grad_u)
    grad_n = gradient(n)
    grad_theta = gradient(theta)
    h = cst.molecular_field(theta, n, grad_n, coeffs)
    beta = cst.lagrange_multiplier(h, n)
    gamma1 = coeffs.gamma1_at(th)
    if float(np.min(gamma1)) < gamma_min:
        raise BlowUpError(
            f"rotational viscosity gamma1 fell to {np.min(gamma1):.6g}, "
            f"below the floor {gamma_min:.6g}")
    gamma2 = coeffs.gamma2_at(th)
    nv = n.values
    Dn = np.einsum("ij...,j...->i...", D.values, nv)

    def perp(v):
        return v - np.einsum("i...,i...->...", v, nv) * nv

    N_val = -(perp(h.values) + gamma2 * perp(Dn)) / gamma1
    N = VectorField.from_values(grid, N_val)
    Om_n = np.einsum("ij...,j...->i...", Om.values, nv)
    dn_dt = VectorField.from_values(
        grid, N_val + Om_n - advect(u, n).values)
    sigma_E = cst.ericksen_stress(theta, n, grad_n, coeffs)
    sigma_L = cst.leslie_stress(theta, n, N, D, coeffs)
    g = cst.kinematic_transport(theta, n, N, D, coeffs)
    q = cst.heat_flux(theta, grad_theta, n, coeffs)
    diss_val = (np.einsum("ij...,ij...->...", sigma_L.values, D.values)
                + np.einsum("i...,i...->...", g.values, N_val))
    identity = (gamma1 * np.einsum("i...,i...->...", N_val, N_val)
                + gamma2 * np.einsum("i...,i...->...", N_val, Dn))
    gN = np.einsum("i...,i...->...", g.values, N_val)
    gap = float(np.max(np.abs(gN - identity)))
    production = diss_val + np.einsum(
        "i...,i...->...", q.values, grad_theta.values) / th
    return StateEvaluation(
        grad_u=grad_u, D=D, Omega=Om, grad_n=grad_n, grad_theta=grad_theta,
        h=h, beta=beta, N=N, dn_dt=dn_dt, sigma_E=sigma_E, sigma_L=sigma_L,
        g=g, q=q,
        dissipation=ScalarField.from_values(grid, diss_val),
        dissipation_identity_gap=gap,
        entropy_production=ScalarField.from_values(grid, production),
    )


# ---------------------------------------------------------------------------
# nonlinear residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rates:
    """Time-derivative estimates feeding the chain-rule temperature term."""

    dtheta_dt: ScalarField

    @classmethod
    def zero(cls, grid: Grid) -> "Rates":
        return cls(dtheta_dt=ScalarField.zeros(grid))


@dataclass(frozen=True)
class Residuals:
    F_u: VectorField
    F_n: VectorField
    F_theta: ScalarField
    evaluation: StateEvaluation


def _chain_rule_term(state: SimState, ev: StateEvaluation,
                     coeffs: CoefficientSet, rates: Rates) -> np.ndarray:
    """theta * [d/dt + u.grad](dW/dtheta), chain-ruled through theta and
    grad n; zero whenever every Frank constant is temperature independent."""
    if all(K.is_constant for K in coeffs.frank):
        return np.zeros(state.grid.shape)
    grid = state.grid
    th = state.theta.values
    nv = state.n.values
    G = ev.grad_n.values
    dG = gradient(ev.dn_dt).values
    divn = np.einsum("ii...->...", G)
    ddivn = np.einsum("ii...->...", dG)
    Gn = np.einsum("ij...,j...->i...", G, nv)
    dGn = (np.einsum("ij...,j...->i...", dG, nv)
           + np.einsum("ij...,j...->i...", G, ev.dn_dt.values))
    J = [0.5 * np.einsum("ij...,ij...->...", G, G),
         0.5 * divn**2,
         0.5 * np.einsum("i...,i...->...", Gn, Gn),
         0.5 * np.einsum("ij...,ji...->...", G, G)]
    dJ = [np.einsum("ij...,ij...->...", G, dG),
          divn * ddivn,
          np.einsum("i...,i...->...", Gn, dGn),
          np.einsum("ij...,ji...->...", G, dG)]
    dt_theta = rates.dtheta_dt.values
    dt_X = np.zeros(grid.shape)
    for i in range(4):
        Kp = coeffs.frank_prime_at(i + 1, th)
        Kpp = coeffs.frank_second_at(i + 1, th)
        dt_X += Kpp * dt_theta * J[i] + Kp * dJ[i]
    X = cst.dW_dtheta(state.theta, state.n, ev.grad_n, coeffs)
    adv_X = advect(state.u, X).values
    return th * (dt_X + adv_X)


def rhs_nonlinear(state: SimState, coeffs: CoefficientSet,
                  ops: LinearOperators, rates: Rates,
                  forcing=None, gamma_min: float = 1e-8,
                  subsystem: str = "full") -> Residuals:
    """Explicit residuals beyond the implicit linear operators.

    Products are dealiased; the director residual is the full director
    rate minus the frozen elastic relaxation; the temperature residual
    carries the transport, the nonconstant-coefficient heat flux, the
    dissipation and the chain-rule term, minus the frozen heat operator.
    """
    grid = state.grid
    ev = evaluate_state(state, coeffs, gamma_min=gamma_min)
    zero_v = VectorField.zeros(grid)
    zero_s = ScalarField.zeros(grid)

    if subsystem == "stokes-only":
        F_u = zero_v
    else:
        stress = TensorField.from_values(
            grid, ev.sigma_E.values + ev.sigma_L.values)
        mom = divergence(truncate(stress)) - advect(state.u, state.u)
        lin_u = np.einsum("...ij,j...->i...",
                          ops.velocity, np.moveaxis(state.u.hat, 0, 0))
        F_u_hat = leray_project(truncate(mom)).hat - lin_u
        F_u = VectorField.from_hat(grid, F_u_hat * grid.dealias_mask)

    if subsystem in ("heat-only", "stokes-only"):
        F_n = zero_v
    else:
        m_hat = state.n.hat.copy()
        zero_idx = (Ellipsis,) + (0,) * grid.dim
        m_hat[zero_idx] -= (np.asarray(coeffs.n_ref) * grid.npoints)
        lin_n = np.einsum("...ij,j...->i...", ops.director, m_hat)
        F_n_hat = truncate(ev.dn_dt).hat - lin_n
        F_n = VectorField.from_hat(grid, F_n_hat * grid.dealias_mask)

    if subsystem == "stokes-only":
        F_theta = zero_s
    else:
        div_q = divergence(truncate(ev.q))
        chain = _chain_rule_term(state, ev, coeffs, rates)
        rhs_th = (div_q.values + ev.dissipation.values + chain
                  - advect(state.u, state.theta).values)
        omega_hat = state.theta.hat.copy()
        omega_hat[(0,) * grid.dim] -= coeffs.theta_ref * grid.npoints
        lin_th = ops.thermal * omega_hat
        F_theta_hat = (ScalarField.from_values(grid, rhs_th).hat - lin_th)
        F_theta = ScalarField.from_hat(grid, F_theta_hat * grid.dealias_mask)

    if forcing is not None:
        fu, fn, fth = forcing(state.t)
        if fu is not None and subsystem != "heat-only":
            F_u = F_u + leray_project(truncate(fu))
        if fn is not None and subsystem == "full":
            F_n = F_n + truncate(fn)
        if fth is not None and subsystem != "stokes-only":
            F_theta = F_theta + truncate(fth)
    return Residuals(F_u=F_u, F_n=F_n, F_theta=F_theta, evaluation=ev)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def renormalize_director(n: VectorField) -> tuple[VectorField, float]:
    """Pointwise projection onto unit length; returns the new field and the
    pre-projection deviation max||n|^2 - 1|."""
    nv = n.values
    norm2 = np.einsum("i...,i...->...", nv, nv)
    deviation = float(np.max(np.abs(norm2 - 1.0)))
    norms = np.sqrt(norm2)
    if np.any(norms <= 0.0) or not np.all(np.isfinite(norms)):
        raise BlowUpError("director vanished: direction undefined")
    return VectorField.from_values(n.grid, nv / norms), deviation


@dataclass(frozen=True)
class StepInfo:
    pre_renorm_deviation: float
    picard_diffs: tuple[float, ...] = ()
    evaluation: StateEvaluation | None = None


def _advance(state: SimState, residuals: Residuals, dt: float,
             coeffs: CoefficientSet, ops: LinearOperators,
             cfg: SolverConfig) -> tuple[SimState, float]:
    """One implicit solve against explicit residuals; returns the new state
    (director renormalized if configured) and the pre-renorm deviation."""
    grid = state.grid
    inv_u, inv_th, inv_n = ops.solvers_for(dt)
    subsystem = cfg.subsystem

    if subsystem == "heat-only":
        u_new = state.u
    else:
        rhs_u = state.u.hat + dt * residuals.F_u.hat
        u_hat = np.einsum("...ij,j...->i...", inv_u, rhs_u)
        u_new = leray_project(VectorField.from_hat(grid, u_hat))

    deviation = 0.0
    if subsystem == "full":
        zero_idx = (Ellipsis,) + (0,) * grid.dim
        m_hat = state.n.hat.copy()
        m_hat[zero_idx] -= np.asarray(coeffs.n_ref) * grid.npoints
        m_hat = np.einsum("...ij,j...->i...", inv_n,
                          m_hat + dt * residuals.F_n.hat)
        n_hat = m_hat
        n_hat[zero_idx] += np.asarray(coeffs.n_ref) * grid.npoints
        n_new = VectorField.from_hat(grid, n_hat)
        if cfg.renormalize_director:
            n_new, deviation = renormalize_director(n_new)
        else:
            nsq = np.einsum("i...,i...->...", n_new.values, n_new.values)
            deviation = float(np.max(np.abs(nsq - 1.0)))
    else:
        n_new = state.n

    if subsystem == "stokes-only":
        theta_new = state.theta
    else:
        omega_hat = state.theta.hat.copy()
        omega_hat[(0,) * grid.dim] -= coeffs.theta_ref * grid.npoints
        omega_hat = inv_th * (omega_hat + dt * residuals.F_theta.hat)
        omega_hat[(0,) * grid.dim] += coeffs.theta_ref * grid.npoints
        theta_new = ScalarField.from_hat(grid, omega_hat)

    new = SimState(t=state.t + dt, u=u_new, n=n_new, theta=theta_new)
    for name, fld in (("u", u_new), ("n", n_new), ("theta", theta_new)):
        if not np.all(np.isfinite(fld.values)):
            raise BlowUpError(f"non-finite {name} after step to t={new.t:.6g}")
    floor = cfg.resolved_theta_min(coeffs)
    if float(theta_new.values.min()) <= floor:
        raise TemperaturePositivityError(
            f"temperature {theta_new.values.min():.6g} reached the floor "
            f"{floor:.6g} at t={new.t:.6g}")
    return new, deviation


def step_imex(state: SimState, dt: float, coeffs: CoefficientSet,
              ops: LinearOperators, cfg: SolverConfig,
              rates: Rates, forcing=None) -> tuple[SimState, Rates, StepInfo]:
    """First-order IMEX step: implicit frozen operators, explicit residuals
    at the old state."""
    res = rhs_nonlinear(state, coeffs, ops, rates, forcing=forcing,
                        gamma_min=cfg.gamma_min, subsystem=cfg.subsystem)
    new, deviation = _advance(state, res, dt, coeffs, ops, cfg)
    new_rates = Rates(dtheta_dt=ScalarField.from_values(
        state.grid, (new.theta.values - state.theta.values) / dt))
    return new, new_rates, StepInfo(pre_renorm_deviation=deviation,
                                    evaluation=res.evaluation)


def _iterate_norm(grid, du, dom, dm) -> float:
    d = grid.dim
    return (intersection_norm(du, d / 2 - 1, d / 2)
            + intersection_norm(dom, d / 2 - 2, d / 2)
            + intersection_norm(dm, d / 2, d / 2 + 1))


def step_picard(state: SimState, dt: float, coeffs: CoefficientSet,
                ops: LinearOperators, cfg: SolverConfig,
                rates: Rates, forcing=None) -> tuple[SimState, Rates, StepInfo]:
    """Fixed-point resolution of one time slab.

    Residuals are frozen at the current iterate and the three linear
    parabolic problems re-solved until the iterate difference (sum of the
    intersection shell norms of the three unknowns) falls below
    picard_tol.  The temperature rate estimate is iterate-consistent:
    (theta_iterate - theta_old)/dt.
    """
    grid = state.grid
    iterate = state
    iterate_rates = rates
    diffs = []
    last_eval = None
    converged = False
    for _ in range(cfg.picard_max_iters):
        res = rhs_nonlinear(iterate, coeffs, ops, iterate_rates,
                            forcing=forcing,
                            gamma_min=cfg.gamma_min, subsystem=cfg.subsystem)
        last_eval = res.evaluation
        candidate, _ = _advance(state, res, dt, coeffs, ops,
                                replace(cfg, renormalize_director=False))
        diff = _iterate_norm(grid, candidate.u - iterate.u,
                             candidate.theta - iterate.theta,
                             candidate.n - iterate.n)
        diffs.append(diff)
        iterate = candidate
        iterate_rates = Rates(dtheta_dt=ScalarField.from_values(
            grid, (candidate.theta.values - state.theta.values) / dt))
        if diff <= cfg.picard_tol:
            converged = True
            break
    if not converged:
        raise PicardNonConvergenceError(
            f"no contraction below {cfg.picard_tol:g} within "
            f"{cfg.picard_max_iters} iterations (last diff {diffs[-1]:.3e})")
    deviation = iterate.constraint_violation()
    n_final = iterate.n
    if cfg.subsystem == "full" and cfg.renormalize_director:
        n_final, deviation = renormalize_director(iterate.n)
    final = SimState(t=iterate.t, u=iterate.u, n=n_final, theta=iterate.theta)
    new_rates = Rates(dtheta_dt=ScalarField.from_values(
        grid, (final.theta.values - state.theta.values) / dt))
    return final, new_rates, StepInfo(pre_renorm_deviation=deviation,
                                      picard_diffs=tuple(diffs),
                                      evaluation=last_eval)


def recover_pressure(state: SimState, coeffs: CoefficientSet,
                     ev: StateEvaluation | None = None) -> ScalarField:
    """Diagnostic pressure: p = (-lap)^(-1) div[momentum right-hand side],
    zero-mean gauge."""
    grid = state.grid
    if ev is None:
        ev = evaluate_state(state, coeffs)
    stress = TensorField.from_values(
        grid, ev.sigma_E.values + ev.sigma_L.values)
    f_total = divergence(truncate(stress)) - advect(state.u, state.u)
    kd = grid.deriv_wavenumbers
    k2 = grid.deriv_k_squared
    div_f = np.sum(1j * kd * f_total.hat, axis=0)
    p_hat = np.zeros_like(div_f)
    nz = k2 > 0
    p_hat[nz] = -div_f[nz] / k2[nz]  # lap p = div f
    return ScalarField.from_hat(grid, p_hat)


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    config: SolverConfig
    times: list
    snapshots: list             # (t, SimState) at the snapshot stride
    records: list               # diagnostics rows (built by diagnostics)
    final_state: SimState
    picard_history: list        # per-step tuples of iterate diffs
    pre_renorm_deviations: list


def run(initial: SimState, coeffs: CoefficientSet, cfg: SolverConfig,
        forcing=None, record_hook=None) -> RunResult:
    """Integrate from the initial state to t_end.

    ``forcing(t) -> (F_u, F_n, F_theta)`` fields (or None entries) feeds
    manufactured-solution studies.  ``record_hook(prev, new, dt, info)``
    is invoked at every diagnostics stride; whatever it returns is
    appended to ``records``.
    """
    grid = initial.grid
    report = check_ellipticity(coeffs, grid, gamma_min=cfg.gamma_min)
    if not report.passed:
        raise EllipticityError(
            "frozen-coefficient operators are not strongly elliptic: "
            + ", ".join(report.failures()))
    initial.validate(constraint_tol=cfg.constraint_tol,
                     theta_min=cfg.resolved_theta_min(coeffs))
    ops = assemble_linear_operators(coeffs, grid)
    stepper = step_imex if cfg.scheme == "imex1" else step_picard

    n_steps = int(round(cfg.t_end / cfg.dt))
    state = initial
    rates = Rates.zero(grid)
    times = [state.t]
    snapshots = [(state.t, state)]
    records = []
    picard_history = []
    deviations = []
    for k in range(1, n_steps + 1):
        prev = state
        state, rates, info = stepper(state, cfg.dt, coeffs, ops, cfg, rates,
                                     forcing=forcing)
        times.append(state.t)
        deviations.append(info.pre_renorm_deviation)
        if info.picard_diffs:
            picard_history.append(info.picard_diffs)
        if record_hook is not None and k % cfg.diag_stride == 0:
            records.append(record_hook(prev, state, cfg.dt, info))
        if k % cfg.snapshot_stride == 0 or k == n_steps:
            snapshots.append((state.t, state))
    return RunResult(config=cfg, times=times, snapshots=snapshots,
                     records=records, final_state=state,
                     picard_history=picard_history,
                     pre_renorm_deviations=deviations)

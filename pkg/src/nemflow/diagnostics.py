"""Machine-checkable balance laws along a trajectory.

On the torus every divergence integrates to exactly zero (spectral
zero-mode read), so the first law turns into conservation of the total
energy integral and the entropy equation into d/dt (total entropy) =
integral of the production rate.  Residuals use the same one-sided time
differences the scheme commits to, so their convergence order matches
the scheme order by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import constitutive as cst
from .coefficients import CoefficientSet
from .grid import ScalarField, VectorField, divergence, gradient
from .solver import (SimState, StateEvaluation, StepInfo, evaluate_state,
                     recover_pressure)

CSV_HEADER = ("t,total_energy,total_entropy,entropy_production_integral,"
              "min_pointwise_production,constraint_violation,"
              "pre_renorm_deviation,first_law_residual_norm,"
              "dissipation_identity_gap")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    total_energy: float
    total_entropy: float
    entropy_production_integral: float  # int of production / theta
    min_pointwise_production: float     # min of theta * production rate
    constraint_violation: float         # post-step max ||n|^2 - 1|
    pre_renorm_deviation: float
    first_law_residual_norm: float
    dissipation_identity_gap: float

    def csv_row(self) -> str:
        vals = (self.t, self.total_energy, self.total_entropy,
                self.entropy_production_integral,
                self.min_pointwise_production, self.constraint_violation,
                self.pre_renorm_deviation, self.first_law_residual_norm,
                self.dissipation_identity_gap)
        return ",".join(format(v, ".17g") for v in vals)


def total_entropy(state: SimState, coeffs: CoefficientSet) -> float:
    grad_n = gradient(state.n)
    return cst.entropy(state.theta, state.n, grad_n, coeffs).integral()


def total_energy(state: SimState, coeffs: CoefficientSet) -> float:
    grad_n = gradient(state.n)
    return cst.total_energy(state.u, state.theta, state.n, grad_n,
                            coeffs).integral()


def first_law_residual(state_old: SimState, state_new: SimState, dt: float,
                       coeffs: CoefficientSet,
                       ev_old: StateEvaluation | None = None) -> ScalarField:
    """Pointwise residual (e_tot_new - e_tot_old)/dt - div(work flux)
    - div(heat flux), fluxes evaluated at the old state.

    Its torus integral equals the discrete d/dt of the total energy
    (divergences drop out exactly), so the integral tracks the scheme's
    energy drift.
    """
    grid = state_old.grid
    if ev_old is None:
        ev_old = evaluate_state(state_old, coeffs)
    e_old = cst.total_energy(state_old.u, state_old.theta, state_old.n,
                             ev_old.grad_n, coeffs)
    grad_n_new = gradient(state_new.n)
    e_new = cst.total_energy(state_new.u, state_new.theta, state_new.n,
                             grad_n_new, coeffs)
    de_dt = (e_new.values - e_old.values) / dt
    pressure = recover_pressure(state_old, coeffs, ev_old)
    dn_dt = VectorField.from_values(
        grid, (state_new.n.values - state_old.n.values) / dt)
    work = cst.work_flux(state_old.u, state_old.theta, state_old.n, dn_dt,
                         ev_old.grad_n, pressure, coeffs)
    residual = de_dt - divergence(work).values - divergence(ev_old.q).values
    return ScalarField.from_values(grid, residual)


@dataclass(frozen=True)
class SecondLawAudit:
    min_production: float           # min pointwise theta * Delta
    production_integral: float      # int Delta = int (theta Delta)/theta
    mechanical_min: float           # min of sigma^L:D + g.N
    mechanical_integral: float
    thermal_min: float              # min of q.grad(theta)/theta
    thermal_integral: float


def second_law_audit(state: SimState, coeffs: CoefficientSet,
                     ev: StateEvaluation | None = None,
                     gamma_min: float = -np.inf) -> SecondLawAudit:
    """Pointwise and integral entropy production, with the mechanical and
    thermal summands reported separately.

    The rotational-viscosity floor is disabled by default: auditing an
    inadmissible coefficient set (gamma1 <= 0) is a legitimate use here,
    as long as gamma1 never vanishes exactly.
    """
    grid = state.grid
    if ev is None:
        ev = evaluate_state(state, coeffs, gamma_min=gamma_min)
    th = state.theta.values
    mech = ev.dissipation.values
    thermal = np.einsum("i...,i...->...", ev.q.values,
                        ev.grad_theta.values) / th
    production = ev.entropy_production.values
    rate = ScalarField.from_values(grid, production / th)
    return SecondLawAudit(
        min_production=float(production.min()),
        production_integral=rate.integral(),
        mechanical_min=float(mech.min()),
        mechanical_integral=ScalarField.from_values(grid, mech / th).integral(),
        thermal_min=float(thermal.min()),
        thermal_integral=ScalarField.from_values(grid,
                                                 thermal / th).integral(),
    )


def entropy_balance(times, entropies, production_integrals):
    """Per-step gaps |Delta(total entropy) - dt * production integral|.

    ``entropies[k]`` is the total entropy at ``times[k]``;
    ``production_integrals[k]`` the production rate integral at the step's
    departure state, so each gap compares one forward-Euler increment.
    """
    times = np.asarray(times, dtype=float)
    entropies = np.asarray(entropies, dtype=float)
    prods = np.asarray(production_integrals, dtype=float)
    if len(times) < 2:
        raise ValueError("need at least two states")
    dts = np.diff(times)
    gaps = np.abs(np.diff(entropies) - dts * prods[: len(dts)])
    return gaps


class DiagnosticsCollector:
    """record_hook factory for :func:`nemflow.solver.run`.

    Accumulates one :class:`DiagnosticsRecord` per diagnostics stride;
    the first call also captures the departure state's totals so entropy
    balances can be audited from t = 0.
    """

    def __init__(self, coeffs: CoefficientSet, first_law: bool = True):
        self.coeffs = coeffs
        self.first_law = first_law
        self.initial_time = None
        self.initial_entropy = None
        self.initial_energy = None
        self.records: list[DiagnosticsRecord] = []

    def hook(self, prev: SimState, new: SimState, dt: float,
             info: StepInfo) -> DiagnosticsRecord:
        coeffs = self.coeffs
        if self.initial_entropy is None:
            self.initial_time = prev.t
            self.initial_entropy = total_entropy(prev, coeffs)
            self.initial_energy = total_energy(prev, coeffs)
        ev = info.evaluation
        audit = second_law_audit(prev, coeffs, ev)
        if self.first_law:
            res = first_law_residual(prev, new, dt, coeffs, ev)
            res_norm = res.l2_norm()
        else:
            res_norm = float("nan")
        gap = ev.dissipation_identity_gap if ev is not None else float("nan")
        rec = DiagnosticsRecord(
            t=new.t,
            total_energy=total_energy(new, coeffs),
            total_entropy=total_entropy(new, coeffs),
            entropy_production_integral=audit.production_integral,
            min_pointwise_production=audit.min_production,
            constraint_violation=new.constraint_violation(),
            pre_renorm_deviation=info.pre_renorm_deviation,
            first_law_residual_norm=res_norm,
            dissipation_identity_gap=gap,
        )
        self.records.append(rec)
        return rec

    # -- series views ---------------------------------------------------------

    def entropy_series(self):
        if self.initial_entropy is None:
            raise ValueError("no records collected")
        times = [self.initial_time] + [r.t for r in self.records]
        etas = [self.initial_entropy] + [r.total_entropy for r in self.records]
        prods = [r.entropy_production_integral for r in self.records]
        return times, etas, prods

    def balance_gaps(self):
        times, etas, prods = self.entropy_series()
        return entropy_balance(times, etas, prods)

    def energy_drift(self) -> float:
        if not self.records or self.initial_energy is None:
            raise ValueError("no records collected")
        scale = max(abs(self.initial_energy), 1e-300)
        return abs(self.records[-1].total_energy - self.initial_energy) / scale

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for rec in self.records:
                fh.write(rec.csv_row() + "\n")

    def summary(self) -> dict:
        if not self.records:
            return {"records": 0}
        return {
            "records": len(self.records),
            "t_final": self.records[-1].t,
            "initial_energy": self.initial_energy,
            "final_energy": self.records[-1].total_energy,
            "energy_drift_relative": self.energy_drift(),
            "initial_entropy": self.initial_entropy,
            "final_entropy": self.records[-1].total_entropy,
            "min_pointwise_production": min(
                r.min_pointwise_production for r in self.records),
            "max_constraint_violation": max(
                r.constraint_violation for r in self.records),
            "max_pre_renorm_deviation": max(
                r.pre_renorm_deviation for r in self.records),
            "max_dissipation_identity_gap": max(
                r.dissipation_identity_gap for r in self.records),
        }

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")

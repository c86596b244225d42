"""Initial states: named presets and explicit Fourier-mode lists.

Directors are always built by rotating the reference director by a tilt
angle field inside a fixed plane, so |n| = 1 holds pointwise to machine
precision by construction.  Velocities are Leray-projected after
assembly.
"""

from __future__ import annotations

import numpy as np

from .besov import random_band_limited
from .coefficients import CoefficientSet
from .errors import ConfigError
from .grid import Grid, ScalarField, VectorField, leray_project, truncate
from .solver import SimState

PRESETS = ("equilibrium", "shear-twist", "hot-spot", "random-small")


def tilt_to_director(grid: Grid, n_ref, tilt: np.ndarray) -> VectorField:
    """Rotate the reference director by the tilt angle field.

    2D: plain rotation of n_ref; 3D: rotation of n_ref toward a fixed
    unit vector orthogonal to it (the lexicographically first coordinate
    direction works after Gram-Schmidt).
    """
    n_ref = np.asarray(n_ref, dtype=float)
    d = grid.dim
    vals = np.zeros((d,) + grid.shape)
    if d == 2:
        base = np.arctan2(n_ref[1], n_ref[0])
        ang = base + tilt
        vals[0] = np.cos(ang)
        vals[1] = np.sin(ang)
    else:
        # orthonormal partner of n_ref
        trial = np.zeros(3)
        trial[int(np.argmin(np.abs(n_ref)))] = 1.0
        partner = trial - (trial @ n_ref) * n_ref
        partner /= np.linalg.norm(partner)
        c, s = np.cos(tilt), np.sin(tilt)
        for i in range(3):
            vals[i] = c * n_ref[i] + s * partner[i]
    return VectorField.from_values(grid, vals)


def _zero_velocity(grid: Grid) -> VectorField:
    return VectorField.zeros(grid)


def _uniform_theta(grid: Grid, theta_ref: float) -> ScalarField:
    return ScalarField.from_values(grid, np.full(grid.shape, theta_ref))


def equilibrium_state(grid: Grid, coeffs: CoefficientSet) -> SimState:
    return SimState(t=0.0, u=_zero_velocity(grid),
                    n=tilt_to_director(grid, coeffs.n_ref,
                                       np.zeros(grid.shape)),
                    theta=_uniform_theta(grid, coeffs.theta_ref))


def shear_twist_state(grid: Grid, coeffs: CoefficientSet,
                      epsilon: float = 1e-2) -> SimState:
    """A single shear mode in u plus a single twist mode in the director."""
    x = grid.coordinates()
    d = grid.dim
    uv = np.zeros((d,) + grid.shape)
    uv[0] = epsilon * np.sin(x[1])  # depends on x2 only: divergence free
    u = VectorField.from_values(grid, uv)
    tilt = epsilon * np.sin(x[0])
    return SimState(t=0.0, u=u,
                    n=tilt_to_director(grid, coeffs.n_ref, tilt),
                    theta=_uniform_theta(grid, coeffs.theta_ref))


def hot_spot_state(grid: Grid, coeffs: CoefficientSet,
                   epsilon: float = 1e-2) -> SimState:
    """Quiescent flow and uniform director with a smooth warm bump."""
    x = grid.coordinates()
    bump = np.ones(grid.shape)
    for xi in x:
        bump = bump * (1.0 + np.cos(xi)) / 2.0
    theta = ScalarField.from_values(
        grid, coeffs.theta_ref + epsilon * bump)
    return SimState(t=0.0, u=_zero_velocity(grid),
                    n=tilt_to_director(grid, coeffs.n_ref,
                                       np.zeros(grid.shape)),
                    theta=theta)


def random_small_state(grid: Grid, coeffs: CoefficientSet,
                       epsilon: float = 1e-2, seed: int = 0) -> SimState:
    """Seeded band-limited random data of amplitude epsilon in every field."""
    u_raw = random_band_limited(grid, seed=seed, decay=2.0, rank=1)
    u_raw = leray_project(truncate(u_raw))
    scale = max(u_raw.max_norm(), 1e-300)
    u = u_raw * (epsilon / scale)
    tilt_raw = random_band_limited(grid, seed=seed + 1, decay=2.0)
    tilt = epsilon * tilt_raw.values / max(tilt_raw.max_norm(), 1e-300)
    th_raw = random_band_limited(grid, seed=seed + 2, decay=2.0)
    theta = ScalarField.from_values(
        grid, coeffs.theta_ref
        + epsilon * th_raw.values / max(th_raw.max_norm(), 1e-300))
    return SimState(t=0.0, u=u,
                    n=tilt_to_director(grid, coeffs.n_ref, tilt),
                    theta=theta)


def preset_state(name: str, grid: Grid, coeffs: CoefficientSet,
                 epsilon: float = 1e-2, seed: int = 0) -> SimState:
    if name == "equilibrium":
        return equilibrium_state(grid, coeffs)
    if name == "shear-twist":
        return shear_twist_state(grid, coeffs, epsilon)
    if name == "hot-spot":
        return hot_spot_state(grid, coeffs, epsilon)
    if name == "random-small":
        return random_small_state(grid, coeffs, epsilon, seed)
    raise ConfigError(f"unknown initial-data preset '{name}'; "
                      f"expected one of {PRESETS}")


def state_from_modes(grid: Grid, coeffs: CoefficientSet, u_modes=(),
                     theta_modes=(), tilt_modes=()) -> SimState:
    """Explicit Fourier-mode lists.

    Each mode is (kvec, component, amplitude, phase) for u and
    (kvec, amplitude, phase) for theta/tilt, contributing
    amplitude * cos(k.x + phase).  The assembled velocity is
    Leray-projected.
    """
    x = grid.coordinates()
    d = grid.dim

    def wave(kvec, phase):
        acc = np.full(grid.shape, float(phase))
        for k, xi in zip(kvec, x):
            acc = acc + k * xi
        return np.cos(acc)

    uv = np.zeros((d,) + grid.shape)
    for kvec, comp, amp, phase in u_modes:
        comp = int(comp)
        if not 0 <= comp < d:
            raise ConfigError(f"velocity component {comp} out of range")
        uv[comp] += amp * wave(kvec, phase)
    u = leray_project(VectorField.from_values(grid, uv))

    th = np.full(grid.shape, coeffs.theta_ref)
    for kvec, amp, phase in theta_modes:
        th += amp * wave(kvec, phase)
    tilt = np.zeros(grid.shape)
    for kvec, amp, phase in tilt_modes:
        tilt += amp * wave(kvec, phase)
    return SimState(t=0.0, u=u,
                    n=tilt_to_director(grid, coeffs.n_ref, tilt),
                    theta=ScalarField.from_values(grid, th))

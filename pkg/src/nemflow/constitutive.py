"""Material laws: elastic energy, stresses, fluxes, entropy, dissipation.

All operations are pure pointwise/spectral maps between fields.  The free
energy density is F = -theta*ln(theta) + W(theta, n, grad n) with W the
four-constant elastic density; the entropy follows by direct
theta-differentiation, eta = (1 + ln theta) - dW/dtheta.

Index conventions: (grad n)_{ij} = d_j n_i, so the chain of a column
vector reads (grad n) n = (n . grad) n.
"""

from __future__ import annotations

import numpy as np

from .coefficients import CoefficientSet
from .errors import ConstitutiveInconsistencyError, TemperaturePositivityError
from .grid import (ScalarField, TensorField, VectorField, divergence,
                   gradient)

# -- small einsum helpers on raw component arrays ---------------------------


def _dot(a, b):
    return np.einsum("i...,i...->...", a, b)


def _outer(a, b):
    return np.einsum("i...,j...->ij...", a, b)


def _matvec(T, v):
    return np.einsum("ij...,j...->i...", T, v)


def _tmatvec(T, v):
    """Transpose-apply: (T^t v)_j = T_{ij} v_i."""
    return np.einsum("ij...,i...->j...", T, v)


def _frob(A, B):
    return np.einsum("ij...,ij...->...", A, B)


def _trace(T):
    return np.einsum("ii...->...", T)


def _transpose(T):
    return np.swapaxes(T, 0, 1)


def _eye_like(grid):
    d = grid.dim
    eye = np.zeros((d, d) + grid.shape)
    for i in range(d):
        eye[i, i] = 1.0
    return eye


def _require_positive(theta: ScalarField) -> np.ndarray:
    th = theta.values
    if np.any(th <= 0.0):
        raise TemperaturePositivityError(
            f"temperature reached {th.min():.6g} <= 0")
    return th


# -- kinematics --------------------------------------------------------------


def strain_and_vorticity(grad_u: TensorField) -> tuple[TensorField, TensorField]:
    """Symmetric/skew split of a velocity gradient; D + Omega = grad u."""
    G = grad_u.values
    Gt = _transpose(G)
    D = TensorField.from_values(grad_u.grid, 0.5 * (G + Gt))
    Om = TensorField.from_values(grad_u.grid, 0.5 * (G - Gt))
    return D, Om


def corotational_flux(dn_dt: VectorField, u: VectorField, grad_n: TensorField,
                      Omega: TensorField, n: VectorField) -> VectorField:
    """Director rate in the co-rotating frame: dn/dt + (u.grad)n - Omega n."""
    val = (dn_dt.values + _matvec(grad_n.values, u.values)
           - _matvec(Omega.values, n.values))
    return VectorField.from_values(n.grid, val)


# -- elastic energy and its derivatives --------------------------------------


def gradient_invariants(n: VectorField, grad_n: TensorField):
    """The four quadratic invariants of (n, grad n).

    Returns (|grad n|^2, (div n)^2, |(n.grad)n|^2, tr{(grad n)^2}) as
    plain arrays.
    """
    G = grad_n.values
    nv = n.values
    i1 = _frob(G, G)
    divn = _trace(G)
    i2 = divn**2
    Gn = _matvec(G, nv)
    i3 = _dot(Gn, Gn)
    i4 = _frob(G, _transpose(G))
    return i1, i2, i3, i4


def oseen_frank_energy(theta: ScalarField, n: VectorField,
                       grad_n: TensorField, coeffs: CoefficientSet) -> ScalarField:
    """Pointwise elastic density sum_i K_i(theta)/2 * invariant_i."""
    th = _require_positive(theta)
    i1, i2, i3, i4 = gradient_invariants(n, grad_n)
    w = np.zeros_like(th)
    for i, inv in enumerate((i1, i2, i3, i4), start=1):
        w += 0.5 * coeffs.frank_at(i, th) * inv
    return ScalarField.from_values(theta.grid, w)


def free_energy(theta: ScalarField, n: VectorField, grad_n: TensorField,
                coeffs: CoefficientSet) -> ScalarField:
    """Helmholtz density F = -theta ln theta + W."""
    th = _require_positive(theta)
    w = oseen_frank_energy(theta, n, grad_n, coeffs).values
    return ScalarField.from_values(theta.grid, -th * np.log(th) + w)


def elastic_stress_conjugate(theta: ScalarField, n: VectorField,
                             grad_n: TensorField,
                             coeffs: CoefficientSet) -> TensorField:
    """dW/d(grad n): K1 G + K2 (div n) Id + K3 (Gn) x n + K4 G^t.

    The K4 (null-Lagrangian for constant K4) term is differentiated as
    written, tr{G^2} -> G^t; the finite-difference oracle in the tests
    pins this tie-break.
    """
    th = theta.values
    G = grad_n.values
    nv = n.values
    K = [coeffs.frank_at(i, th) for i in (1, 2, 3, 4)]
    divn = _trace(G)
    Gn = _matvec(G, nv)
    out = (K[0] * G
           + K[1] * divn * _eye_like(theta.grid)
           + K[2] * _outer(Gn, nv)
           + K[3] * _transpose(G))
    return TensorField.from_values(theta.grid, out)


def dW_dn(theta: ScalarField, n: VectorField, grad_n: TensorField,
          coeffs: CoefficientSet) -> VectorField:
    """Partial derivative of W in n at frozen grad n (only K3 contributes)."""
    th = theta.values
    G = grad_n.values
    Gn = _matvec(G, n.values)
    val = coeffs.frank_at(3, th) * _tmatvec(G, Gn)
    return VectorField.from_values(theta.grid, val)


def dW_dtheta(theta: ScalarField, n: VectorField, grad_n: TensorField,
              coeffs: CoefficientSet) -> ScalarField:
    """dW/dtheta = sum_i K_i'(theta)/2 * invariant_i."""
    th = theta.values
    invs = gradient_invariants(n, grad_n)
    out = np.zeros_like(th)
    for i, inv in enumerate(invs, start=1):
        out += 0.5 * coeffs.frank_prime_at(i, th) * inv
    return ScalarField.from_values(theta.grid, out)


def molecular_field(theta: ScalarField, n: VectorField, grad_n: TensorField,
                    coeffs: CoefficientSet) -> VectorField:
    """Variational derivative h = dW/dn - div dW/d(grad n).

    Temperature enters only through the frozen coefficients K_i(theta);
    the divergence acts on the full spatially varying conjugate tensor.
    """
    _require_positive(theta)
    phi = elastic_stress_conjugate(theta, n, grad_n, coeffs)
    bulk = dW_dn(theta, n, grad_n, coeffs)
    return bulk - divergence(phi)


def lagrange_multiplier(h: VectorField, n: VectorField) -> ScalarField:
    """Unit-constraint multiplier beta = h . n."""
    return ScalarField.from_values(n.grid, _dot(h.values, n.values))


def ericksen_stress(theta: ScalarField, n: VectorField, grad_n: TensorField,
                    coeffs: CoefficientSet) -> TensorField:
    """Elastic back-reaction sigma^E_{ij} = -(d_i n_k) dW/d(d_j n_k)."""
    _require_positive(theta)
    G = grad_n.values
    phi = elastic_stress_conjugate(theta, n, grad_n, coeffs).values
    out = -np.einsum("ki...,kj...->ij...", G, phi)
    return TensorField.from_values(theta.grid, out)


# -- viscous stress and transport --------------------------------------------


def leslie_stress(theta: ScalarField, n: VectorField, N: VectorField,
                  D: TensorField, coeffs: CoefficientSet,
                  compressible: bool = False) -> TensorField:
    """Anisotropic viscous stress, term by term.

    Incompressible form (default): alpha1 (n.Dn) n x n + alpha2 N x n
    + alpha3 n x N + alpha4 D + alpha5 Dn x n + alpha6 n x Dn.  The
    compressible flag adds alpha0 (n.Dn) Id + alpha7 trD Id
    + alpha8 trD n x n.
    """
    th = theta.values
    nv, Nv, Dv = n.values, N.values, D.values
    a = [coeffs.alpha_at(i, th) for i in range(9)]
    Dn = _matvec(Dv, nv)
    nDn = _dot(nv, Dn)
    out = (a[1] * nDn * _outer(nv, nv)
           + a[2] * _outer(Nv, nv)
           + a[3] * _outer(nv, Nv)
           + a[4] * Dv
           + a[5] * _outer(Dn, nv)
           + a[6] * _outer(nv, Dn))
    if compressible:
        trD = _trace(Dv)
        eye = _eye_like(theta.grid)
        out = out + (a[0] * nDn * eye
                     + a[7] * trD * eye
                     + a[8] * trD * _outer(nv, nv))
    return TensorField.from_values(theta.grid, out)


def kinematic_transport(theta: ScalarField, n: VectorField, N: VectorField,
                        D: TensorField, coeffs: CoefficientSet,
                        verify: bool = False,
                        verify_tol: float = 1e-10) -> VectorField:
    """Flow torque on the director: gamma1 N + gamma2 [Dn - (n.Dn) n].

    With ``verify=True`` the skew-stress route -(sigma^L - sigma^L^t) n
    is assembled from the six-term stress and compared against the
    projected form; disagreement beyond ``verify_tol`` (relative) raises
    :class:`ConstitutiveInconsistencyError`.
    """
    th = theta.values
    nv, Nv, Dv = n.values, N.values, D.values
    g1 = coeffs.gamma1_at(th)
    g2 = coeffs.gamma2_at(th)
    Dn = _matvec(Dv, nv)
    nDn = _dot(nv, Dn)
    g = g1 * Nv + g2 * (Dn - nDn * nv)
    out = VectorField.from_values(theta.grid, g)
    if verify:
        sig = leslie_stress(theta, n, N, D, coeffs).values
        skew = sig - _transpose(sig)
        g_alt = -_matvec(skew, nv)
        scale = float(np.max(np.abs(g)))
        gap = float(np.max(np.abs(g_alt - g)))
        if gap > verify_tol * max(scale, 1e-300):
            raise ConstitutiveInconsistencyError(
                f"kinematic transport routes disagree: gap {gap:.3e} "
                f"vs scale {scale:.3e}")
    return out


def heat_flux(theta: ScalarField, grad_theta: VectorField, n: VectorField,
              coeffs: CoefficientSet) -> VectorField:
    """Anisotropic Fourier law lambda1 grad(theta) + lambda2 (n.grad theta) n."""
    th = theta.values
    gt, nv = grad_theta.values, n.values
    l1 = coeffs.lambda_at(1, th)
    l2 = coeffs.lambda_at(2, th)
    return VectorField.from_values(
        theta.grid, l1 * gt + l2 * _dot(nv, gt) * nv)


# -- thermodynamic potentials --------------------------------------------------


def entropy(theta: ScalarField, n: VectorField, grad_n: TensorField,
            coeffs: CoefficientSet) -> ScalarField:
    """Local entropy eta = (1 + ln theta) - dW/dtheta."""
    th = _require_positive(theta)
    dw = dW_dtheta(theta, n, grad_n, coeffs).values
    return ScalarField.from_values(theta.grid, 1.0 + np.log(th) - dw)


def internal_energy(theta: ScalarField, n: VectorField, grad_n: TensorField,
                    coeffs: CoefficientSet) -> ScalarField:
    """e_int = F + theta*eta, simplified to theta + W - theta*dW/dtheta."""
    th = _require_positive(theta)
    w = oseen_frank_energy(theta, n, grad_n, coeffs).values
    dw = dW_dtheta(theta, n, grad_n, coeffs).values
    return ScalarField.from_values(theta.grid, th + w - th * dw)


def total_energy(u: VectorField, theta: ScalarField, n: VectorField,
                 grad_n: TensorField, coeffs: CoefficientSet,
                 rho: float = 1.0) -> ScalarField:
    """e_tot = e_int + rho |u|^2 / 2."""
    e = internal_energy(theta, n, grad_n, coeffs).values
    kin = 0.5 * rho * _dot(u.values, u.values)
    return ScalarField.from_values(theta.grid, e + kin)


def entropy_production(theta: ScalarField, grad_theta: VectorField,
                       n: VectorField, N: VectorField, D: TensorField,
                       coeffs: CoefficientSet,
                       compressible: bool = False) -> ScalarField:
    """Pointwise production theta*Delta = sigma^L:D + g.N + q.grad(theta)/theta."""
    th = _require_positive(theta)
    sig = leslie_stress(theta, n, N, D, coeffs, compressible=compressible)
    g = kinematic_transport(theta, n, N, D, coeffs)
    q = heat_flux(theta, grad_theta, n, coeffs)
    val = (_frob(sig.values, D.values)
           + _dot(g.values, N.values)
           + _dot(q.values, grad_theta.values) / th)
    return ScalarField.from_values(theta.grid, val)


def viscous_dissipation(theta: ScalarField, n: VectorField, N: VectorField,
                        D: TensorField, coeffs: CoefficientSet,
                        compressible: bool = False) -> ScalarField:
    """The mechanical part sigma^L:D + g.N alone."""
    sig = leslie_stress(theta, n, N, D, coeffs, compressible=compressible)
    g = kinematic_transport(theta, n, N, D, coeffs)
    val = _frob(sig.values, D.values) + _dot(g.values, N.values)
    return ScalarField.from_values(theta.grid, val)


def work_flux(u: VectorField, theta: ScalarField, n: VectorField,
              dn_dt: VectorField, grad_n: TensorField, pressure: ScalarField,
              coeffs: CoefficientSet) -> VectorField:
    """Energy flux T u + [dW/d(grad n)]^t (dn/dt + u.grad n) - u e_tot,
    with T = -p Id + sigma^E + sigma^L.  Diagnostic only."""
    grid = u.grid
    grad_u = gradient(u)
    D, Om = strain_and_vorticity(grad_u)
    ndot = VectorField.from_values(
        grid, dn_dt.values + _matvec(grad_n.values, u.values))
    N = VectorField.from_values(
        grid, ndot.values - _matvec(Om.values, n.values))
    sigE = ericksen_stress(theta, n, grad_n, coeffs).values
    sigL = leslie_stress(theta, n, N, D, coeffs).values
    T = -pressure.values * _eye_like(grid) + sigE + sigL
    phi = elastic_stress_conjugate(theta, n, grad_n, coeffs).values
    etot = total_energy(u, theta, n, grad_n, coeffs).values
    # flux component j carries T_ij u_i (first index contracted), the
    # pairing under which div(T^t u) - T : grad u = u . div T holds with
    # the row-wise divergence d_j T_ij; T is not symmetric here
    val = (_tmatvec(T, u.values) + _tmatvec(phi, ndot.values)
           - u.values * etot)
    return VectorField.from_values(grid, val)

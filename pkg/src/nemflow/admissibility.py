"""Second-law admissibility of viscosity/conductivity coefficient samples.

The mechanical entropy production sigma^L:D + g.N is a quadratic form in
the co-rotational rate N (orthogonal to the director) and the strain rate
D (traceless in the incompressible sector).  A coefficient sample
satisfies the second law iff that form is positive semidefinite and the
heat-flux form lambda1 |grad theta|^2 + lambda2 (n.grad theta)^2 is
nonnegative.

Two independent routes decide the mechanical part:

* the canonical eigenvalue check on the assembled form matrix, and
* a seeded sampling oracle (random directions on the joint (N, D) sphere
  plus shifted-power refinement of the best candidates, free of any
  eigendecomposition).

The closed-form inequality lists in circulation (including a structured
determinant formula and several sign/factor variants of the coupled
inequality) are evaluated verbatim as named margins and their verdicts
compared against the canonical one; disagreements are reported, never
asserted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet

_EIG_TOL_FACTOR = 1e-10


@dataclass(frozen=True)
class ViscositySample:
    """Numeric Leslie viscosities and heat conductivities at one state."""

    alpha: tuple[float, ...]
    lambda1: float
    lambda2: float
    dim: int = 3

    def __init__(self, alpha, lambda1=0.0, lambda2=0.0, dim=3):
        alpha = tuple(float(a) for a in alpha)
        if len(alpha) != 9:
            raise ValueError("need 9 viscosities alpha0..alpha8")
        if not all(np.isfinite(alpha)):
            raise ValueError("non-finite viscosity")
        if dim < 2:
            raise ValueError("dim must be >= 2")
        if not (np.isfinite(lambda1) and np.isfinite(lambda2)):
            raise ValueError("non-finite conductivity")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lambda1", float(lambda1))
        object.__setattr__(self, "lambda2", float(lambda2))
        object.__setattr__(self, "dim", int(dim))

    @classmethod
    def from_coefficients(cls, coeffs: CoefficientSet, theta: float,
                          dim: int = 3) -> "ViscositySample":
        return cls(alpha=[coeffs.alpha_at(i, theta) for i in range(9)],
                   lambda1=coeffs.lambda_at(1, theta),
                   lambda2=coeffs.lambda_at(2, theta),
                   dim=dim)

    @property
    def gamma1(self) -> float:
        return self.alpha[3] - self.alpha[2]

    @property
    def gamma2(self) -> float:
        return self.alpha[6] - self.alpha[5]


# ---------------------------------------------------------------------------
# closed-form determinants
# ---------------------------------------------------------------------------


def structured_det(x: float, y: float, z: float, N: int) -> float:
    """Determinant of the N x N matrix with first diagonal entry x, other
    diagonal entries z, and all off-diagonal entries y:

        det = (z - y)^(N-2) [x z + (N-2) x y - (N-1) y^2].
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    return (z - y) ** (N - 2) * (x * z + (N - 2) * x * y - (N - 1) * y**2)


def build_matrix_M(sample: ViscositySample, d: int | None = None) -> np.ndarray:
    """Structured matrix governing the diagonal-strain/dilatation sector
    of the compressible dissipation.

    Layout: corner (1,1) = alpha1+alpha5+alpha6+2 alpha4; interior block
    2 alpha4 on the diagonal, alpha4 off; corner (d,d) =
    alpha0+alpha4+alpha7+alpha8; corners (1,d) = (d,1) =
    (alpha0+alpha1+alpha8)/2; remaining last-row/column entries zero.
    For d = 2 the interior block is empty.
    """
    d = sample.dim if d is None else int(d)
    if d < 2:
        raise ValueError("d must be >= 2")
    a = sample.alpha
    M = np.full((d, d), a[4])
    np.fill_diagonal(M, 2 * a[4])
    M[0, 0] = a[1] + a[5] + a[6] + 2 * a[4]
    M[-1, :] = 0.0
    M[:, -1] = 0.0
    M[-1, -1] = a[0] + a[4] + a[7] + a[8]
    M[0, -1] = M[-1, 0] = 0.5 * (a[0] + a[1] + a[8])
    return M


def det_M_closed_form(sample: ViscositySample, d: int | None = None,
                      literal: bool = False) -> float:
    """Closed-form determinant of :func:`build_matrix_M` (d >= 3).

    The correct form (matches the LU determinant of the built matrix, and
    is degree-homogeneous as a determinant must be) is

        alpha4^(d-2) [ (a0+a4+a7+a8){(d-1)(a1+a5+a6) + d a4}
                       - (d-1)(a0+a1+a8)^2 / 4 ].

    ``literal=True`` evaluates the variant in circulation that carries a
    spurious extra alpha4 factor on the first product; it is kept only
    for comparison reporting.
    """
    d = sample.dim if d is None else int(d)
    if d < 3:
        raise ValueError("closed form requires d >= 3")
    a = sample.alpha
    c2 = a[0] + a[4] + a[7] + a[8]
    s = a[1] + a[5] + a[6]
    off2 = (a[0] + a[1] + a[8]) ** 2
    first = c2 * ((d - 1) * s + d * a[4])
    if literal:
        first *= a[4]
    return a[4] ** (d - 2) * (first - (d - 1) * off2 / 4)


# ---------------------------------------------------------------------------
# the dissipation quadratic form
# ---------------------------------------------------------------------------


def dissipation_value(sample: ViscositySample, N: np.ndarray,
                      D: np.ndarray, compressible: bool = False):
    """sigma^L : D + g . N for numeric N (with N.e1 = 0) and symmetric D.

    Written through the stress/transport formulas themselves (director
    fixed to e1 without loss of generality; the form's spectrum is
    rotation invariant).  Accepts batches: N of shape (..., d) with D of
    shape (..., d, d) returns an array of shape (...).
    """
    a = sample.alpha
    d = sample.dim
    N = np.asarray(N, dtype=float)
    D = np.asarray(D, dtype=float)
    n = np.zeros(d)
    n[0] = 1.0
    Dn = np.einsum("...ij,j->...i", D, n)
    nDn = Dn[..., 0]
    nn = np.outer(n, n)
    sig = (a[1] * nDn[..., None, None] * nn
           + a[2] * N[..., :, None] * n
           + a[3] * n[:, None] * N[..., None, :]
           + a[4] * D
           + a[5] * Dn[..., :, None] * n
           + a[6] * n[:, None] * Dn[..., None, :])
    if compressible:
        trD = np.einsum("...ii->...", D)
        eye = np.eye(d)
        sig = sig + (a[0] * nDn[..., None, None] * eye
                     + a[7] * trD[..., None, None] * eye
                     + a[8] * trD[..., None, None] * nn)
    g = -np.einsum("...ij,j->...i", sig - np.swapaxes(sig, -1, -2), n)
    out = (np.einsum("...ij,...ij->...", sig, D)
           + np.einsum("...i,...i->...", g, N))
    return float(out) if out.ndim == 0 else out


def _direction_basis(d: int, compressible: bool):
    """Frobenius-orthonormal basis of the (N, D) variable space with the
    director along e1.  Returns (N_basis, D_basis) arrays."""
    N_basis = []
    for i in range(1, d):
        e = np.zeros(d)
        e[i] = 1.0
        N_basis.append(e)
    D_basis = []
    if compressible:
        for i in range(d):
            E = np.zeros((d, d))
            E[i, i] = 1.0
            D_basis.append(E)
    else:
        # orthonormal traceless diagonal matrices
        for m in range(1, d):
            diag = np.zeros(d)
            diag[:m] = 1.0
            diag[m] = -m
            E = np.diag(diag / np.sqrt(m * (m + 1)))
            D_basis.append(E)
    for i in range(d):
        for j in range(i + 1, d):
            E = np.zeros((d, d))
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            D_basis.append(E)
    return np.array(N_basis), np.array(D_basis)


def dissipation_matrix(sample: ViscositySample, compressible: bool = False
                       ) -> np.ndarray:
    """Symmetric matrix of the dissipation form in the orthonormal basis
    from :func:`_direction_basis` (N coordinates first), assembled by
    polarization of the batched scalar form."""
    d = sample.dim
    N_basis, D_basis = _direction_basis(d, compressible)
    nN = len(N_basis)
    dim_total = nN + len(D_basis)
    eye = np.eye(dim_total)
    idx_i, idx_j = np.triu_indices(dim_total, k=1)
    X = np.concatenate([eye, eye[idx_i] + eye[idx_j]])
    Ns = np.einsum("ta,ai->ti", X[:, :nN], N_basis)
    Ds = np.einsum("ta,aij->tij", X[:, nN:], D_basis)
    vals = dissipation_value(sample, Ns, Ds, compressible)
    diag, pairs = vals[:dim_total], vals[dim_total:]
    Q = np.diag(diag)
    Q[idx_i, idx_j] = Q[idx_j, idx_i] = 0.5 * (pairs - diag[idx_i]
                                               - diag[idx_j])
    return Q


@dataclass(frozen=True)
class SemidefiniteResult:
    passed: bool
    lambda_min: float
    lambda_max: float
    sylvester_minors: tuple[float, ...]
    sylvester_passed: bool


def semidefinite_check(matrix: np.ndarray,
                       tol_factor: float = _EIG_TOL_FACTOR) -> SemidefiniteResult:
    """Canonical semidefiniteness verdict by symmetric eigendecomposition.

    Passes iff lambda_min >= -tol_factor * ||matrix||.  Leading principal
    minors are also computed (the classical fast path for *definiteness*)
    and reported alongside, never used for the verdict.
    """
    M = np.asarray(matrix, dtype=float)
    M = 0.5 * (M + M.T)
    eigs = np.linalg.eigvalsh(M)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    scale = max(abs(lam_min), abs(lam_max), 1e-300)
    minors = tuple(float(np.linalg.det(M[: k + 1, : k + 1]))
                   for k in range(M.shape[0]))
    tol = tol_factor * scale
    return SemidefiniteResult(
        passed=bool(lam_min >= -tol),
        lambda_min=lam_min,
        lambda_max=lam_max,
        sylvester_minors=minors,
        sylvester_passed=bool(all(m >= -tol for m in minors)),
    )


@dataclass(frozen=True)
class DissipationMinimum:
    """Result of the sampling oracle.

    ``min_value`` is the Rayleigh-quotient minimum of the form over the
    joint (N, D) direction space (random starts + shifted-power
    refinement); its sign adjudicates semidefiniteness.
    ``product_sphere_min`` is the raw form minimum over samples with
    |N| = |D| = 1 separately (a coarser probe kept for reference).
    """

    min_value: float
    argmin_N: np.ndarray
    argmin_D: np.ndarray
    product_sphere_min: float
    trials: int


def dissipation_quadratic_min(sample: ViscositySample,
                              compressible: bool = False,
                              trials: int = 10_000,
                              seed: int = 0,
                              refine_iters: int = 60,
                              refine_starts: int = 8) -> DissipationMinimum:
    """Seeded random minimization of the dissipation form.

    Directions are uniform on the sphere of the concatenated (N, D)
    coordinates; the best ``refine_starts`` candidates are polished with
    shifted power iteration on (sigma I - Q) (sigma a row-sum bound on
    the spectral radius), which drives the Rayleigh quotient to the
    smallest eigenvalue without ever calling an eigensolver.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = sample.dim
    Q = dissipation_matrix(sample, compressible)
    dim_total = Q.shape[0]
    nN = d - 1
    rng = np.random.default_rng(seed)

    X = rng.standard_normal((trials, dim_total))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    rayleigh = np.einsum("ti,ij,tj->t", X, Q, X)

    # product-sphere probe: renormalize the N block and D block separately
    Xp = X.copy()
    n_norm = np.linalg.norm(Xp[:, :nN], axis=1, keepdims=True)
    d_norm = np.linalg.norm(Xp[:, nN:], axis=1, keepdims=True)
    ok = (n_norm[:, 0] > 1e-12) & (d_norm[:, 0] > 1e-12)
    Xp = Xp[ok]
    Xp[:, :nN] /= n_norm[ok]
    Xp[:, nN:] /= d_norm[ok]
    ps_vals = np.einsum("ti,ij,tj->t", Xp, Q, Xp)
    product_sphere_min = float(ps_vals.min()) if ps_vals.size else float("nan")

    # refinement: shifted power iteration, then Rayleigh-quotient polish.
    # Every candidate value is a Rayleigh quotient of a real vector, hence
    # never below the true minimum; taking the overall min is safe.
    order = np.argsort(rayleigh)
    starts = X[order[:refine_starts]]
    sigma = 1.01 * float(np.max(np.sum(np.abs(Q), axis=1))) + 1e-30
    V = starts.T.copy()
    shifted = sigma * np.eye(dim_total) - Q
    for _ in range(refine_iters):
        V = shifted @ V
        V /= np.linalg.norm(V, axis=0, keepdims=True)
    scale = max(sigma, 1e-30)
    eye = np.eye(dim_total)
    polished = []
    for t in range(V.shape[1]):
        v = V[:, t]
        for _ in range(4):
            mu = float(v @ Q @ v)
            try:
                w = np.linalg.solve(Q - (mu - 1e-12 * scale) * eye, v)
            except np.linalg.LinAlgError:
                break
            norm_w = float(np.linalg.norm(w))
            if not np.isfinite(norm_w) or norm_w == 0.0:
                break
            v = w / norm_w
        polished.append(v)
    V = np.column_stack([V] + polished)
    refined = np.einsum("it,ij,jt->t", V, Q, V)
    best_refined = int(np.argmin(refined))
    min_value = float(min(rayleigh.min(), refined.min()))
    if refined[best_refined] <= rayleigh.min():
        x_best = V[:, best_refined]
    else:
        x_best = X[order[0]]

    N_basis, D_basis = _direction_basis(d, compressible)
    arg_N = np.tensordot(x_best[:nN], N_basis, axes=1)
    arg_D = np.tensordot(x_best[nN:], D_basis, axes=1)
    return DissipationMinimum(
        min_value=min_value,
        argmin_N=arg_N,
        argmin_D=arg_D,
        product_sphere_min=product_sphere_min,
        trials=trials,
    )


# ---------------------------------------------------------------------------
# inequality lists
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    margins: dict
    lambda_min: float | None = None
    variant_verdicts: dict = field(default_factory=dict)


def check_heat(sample: ViscositySample) -> CheckResult:
    """lambda1 >= 0 and lambda1 + lambda2 >= 0, exact affine margins."""
    margins = {
        "lambda1_nonneg": sample.lambda1,
        "lambda_sum_nonneg": sample.lambda1 + sample.lambda2,
    }
    return CheckResult(passed=all(v >= 0.0 for v in margins.values()),
                       margins=margins)


def _common_margins(a) -> dict:
    return {
        "gamma1_nonneg": a[3] - a[2],
        "alpha4_nonneg": a[4],
        "twist_shear_sum": 2 * a[4] + a[5] + a[6],
    }


def check_incompressible(sample: ViscositySample) -> CheckResult:
    """Traceless-strain sector; canonical verdict by eigenvalue check.

    Both literal sign variants of the coupled inequality are recorded
    (`coupled_gamma1` with the classical 4*gamma1*(2a4+a5+a6) leading
    factor, `coupled_intro_literal` with the 4(a2-a3)(2a4+2a5+2a6+3a4)
    one), together with `coupled_form`, the coupling the assembled form
    actually carries.
    """
    a = sample.alpha
    margins = _common_margins(a)
    margins["stretch_sum"] = 2 * a[1] + 2 * a[5] + 2 * a[6] + 3 * a[4]
    cross_lit = a[2] + a[3] + a[5] - a[6]
    cross_form = a[2] + a[3] + a[6] - a[5]
    margins["coupled_gamma1"] = (4 * (a[3] - a[2]) * (2 * a[4] + a[5] + a[6])
                                 - cross_lit**2)
    margins["coupled_intro_literal"] = (
        4 * (a[2] - a[3]) * (2 * a[4] + 2 * a[5] + 2 * a[6] + 3 * a[4])
        - cross_lit**2)
    margins["coupled_form"] = (4 * (a[3] - a[2]) * (2 * a[4] + a[5] + a[6])
                               - cross_form**2)
    sd = semidefinite_check(dissipation_matrix(sample, compressible=False))
    literal_keys = ("gamma1_nonneg", "alpha4_nonneg", "twist_shear_sum",
                    "stretch_sum")
    variant_verdicts = {
        "list_with_coupled_gamma1": all(
            margins[k] >= 0 for k in literal_keys + ("coupled_gamma1",)),
        "list_with_coupled_intro_literal": all(
            margins[k] >= 0 for k in literal_keys + ("coupled_intro_literal",)),
    }
    return CheckResult(passed=sd.passed, margins=margins,
                       lambda_min=sd.lambda_min,
                       variant_verdicts=variant_verdicts)


def check_compressible(sample: ViscositySample, d: int | None = None
                       ) -> CheckResult:
    """Full-strain sector with dilatational couplings.

    Margins include the N-indexed principal-minor conditions
    N(a1+a5+a6) + (N+1) a4 for N = 2..d-1 and three variants of the final
    determinant inequality (corrected, literal-with-extra-alpha4, and the
    introduction's alpha0-free version).  Canonical verdict: eigenvalue
    check of the assembled compressible form.
    """
    d = sample.dim if d is None else int(d)
    if d < 2:
        raise ValueError("d must be >= 2")
    a = sample.alpha
    s = a[1] + a[5] + a[6]
    margins = _common_margins(a)
    for N in range(2, d):
        margins[f"principal_minor_{N}"] = N * s + (N + 1) * a[4]
    c2 = a[0] + a[4] + a[7] + a[8]
    off2 = (a[0] + a[1] + a[8]) ** 2
    margins["det_final"] = c2 * ((d - 1) * s + d * a[4]) - (d - 1) * off2 / 4
    margins["det_final_literal"] = (a[4] * c2 * ((d - 1) * s + d * a[4])
                                    - (d - 1) * off2 / 4)
    margins["intro_final"] = ((a[4] + a[7] + a[8])
                              * ((d - 1) * s + (2 * d - 3) * a[4])
                              - (a[8] + a[1]) ** 2 / d)
    sub = ViscositySample(alpha=a, lambda1=sample.lambda1,
                          lambda2=sample.lambda2, dim=d)
    sd = semidefinite_check(dissipation_matrix(sub, compressible=True))
    minor_keys = tuple(k for k in margins if k.startswith("principal_minor"))
    base = ("gamma1_nonneg", "alpha4_nonneg", "twist_shear_sum")
    variant_verdicts = {
        "list_with_det_final": all(
            margins[k] >= 0 for k in base + minor_keys + ("det_final",)),
        "list_with_det_final_literal": all(
            margins[k] >= 0 for k in base + minor_keys + ("det_final_literal",)),
        "list_with_intro_final": all(
            margins[k] >= 0 for k in base + minor_keys + ("intro_final",)),
    }
    return CheckResult(passed=sd.passed, margins=margins,
                       lambda_min=sd.lambda_min,
                       variant_verdicts=variant_verdicts)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    heat_ok: bool
    incompressible_ok: bool
    compressible_ok: bool
    margins: dict
    oracle_min: dict
    variant_disagreements: list

    def to_dict(self) -> dict:
        return {
            "heat_ok": self.heat_ok,
            "incompressible_ok": self.incompressible_ok,
            "compressible_ok": self.compressible_ok,
            "margins": self.margins,
            "oracle_min": self.oracle_min,
            "variant_disagreements": self.variant_disagreements,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def full_report(sample: ViscositySample, trials: int = 10_000,
                seed: int = 0) -> AdmissibilityReport:
    """Run every check plus the sampling oracle on one sample."""
    heat = check_heat(sample)
    inc = check_incompressible(sample)
    com = check_compressible(sample)
    oracle_inc = dissipation_quadratic_min(sample, compressible=False,
                                           trials=trials, seed=seed)
    oracle_com = dissipation_quadratic_min(sample, compressible=True,
                                           trials=trials, seed=seed + 1)
    disagreements = []
    for name, verdict in inc.variant_verdicts.items():
        if verdict != inc.passed:
            disagreements.append(f"incompressible:{name}")
    for name, verdict in com.variant_verdicts.items():
        if verdict != com.passed:
            disagreements.append(f"compressible:{name}")
    return AdmissibilityReport(
        heat_ok=heat.passed,
        incompressible_ok=inc.passed,
        compressible_ok=com.passed,
        margins={"heat": heat.margins, "incompressible": inc.margins,
                 "compressible": com.margins},
        oracle_min={"incompressible": oracle_inc.min_value,
                    "compressible": oracle_com.min_value},
        variant_disagreements=disagreements,
    )

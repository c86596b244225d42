"""Temperature-dependent material coefficients.

Every material function (Leslie viscosities alpha_0..alpha_8, heat
conductivities lambda_1, lambda_2, Frank constants K_1..K_4) is a
polynomial in the temperature deviation (theta - theta_ref).  Polynomials
are closed under the theta-derivatives needed by the entropy and the
temperature equation and serialize as plain coefficient lists, e.g.
``alpha4 = [1.0, 0.1]`` meaning ``1.0 + 0.1*(theta - theta_ref)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as _poly

ALPHA_NAMES = tuple(f"alpha{i}" for i in range(9))
FRANK_NAMES = ("K1", "K2", "K3", "K4")


@dataclass(frozen=True)
class ThetaPoly:
    """Polynomial in (theta - theta_ref), lowest order first."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs):
        if np.isscalar(coeffs):
            coeffs = (float(coeffs),)
        coeffs = tuple(float(c) for c in coeffs)
        if not coeffs:
            coeffs = (0.0,)
        if not all(np.isfinite(coeffs)):
            raise ValueError("non-finite polynomial coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, delta):
        """Evaluate at delta = theta - theta_ref (scalar or array)."""
        return _poly.polyval(delta, self.coeffs)

    def derivative(self) -> "ThetaPoly":
        return ThetaPoly(tuple(_poly.polyder(self.coeffs)) or (0.0,))

    @property
    def constant(self) -> float:
        """Value at theta = theta_ref."""
        return self.coeffs[0]

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])

    def __sub__(self, other: "ThetaPoly") -> "ThetaPoly":
        return ThetaPoly(tuple(_poly.polysub(self.coeffs, other.coeffs)))

    def __add__(self, other: "ThetaPoly") -> "ThetaPoly":
        return ThetaPoly(tuple(_poly.polyadd(self.coeffs, other.coeffs)))


def frank_constants_from_splay_twist_bend(k11, k22, k33, k24):
    """Convert standard Frank constants to the internal K1..K4 bundle.

    The internal elastic density is sum_i K_i/2 times the invariants
    (|grad n|^2, (div n)^2, |(n.grad)n|^2, tr{(grad n)^2}).  In terms of
    splay/twist/bend/saddle-splay constants the map is

        K1 = k22,  K2 = k11 - k22 - k24,  K3 = k33 - k22,  K4 = k24.

    Each argument may be a scalar or coefficient list; the result is a
    tuple of four :class:`ThetaPoly`.
    """
    k11, k22, k33, k24 = (ThetaPoly(k) for k in (k11, k22, k33, k24))
    return (k22, k11 - k22 - k24, k33 - k22, k24)


@dataclass(frozen=True)
class CoefficientSet:
    """Complete material description at a reference state.

    Attributes
    ----------
    theta_ref : float
        Reference temperature (> 0); all polynomials are centred here.
    n_ref : tuple of float
        Reference director, unit to 1e-14.
    alpha : tuple of 9 ThetaPoly
        Leslie viscosities alpha_0..alpha_8.
    lambda1, lambda2 : ThetaPoly
        Heat-flux conductivities.
    frank : tuple of 4 ThetaPoly
        Elastic constants K1..K4.
    """

    theta_ref: float
    n_ref: tuple[float, ...]
    alpha: tuple[ThetaPoly, ...]
    lambda1: ThetaPoly
    lambda2: ThetaPoly
    frank: tuple[ThetaPoly, ...]

    def __init__(self, theta_ref, n_ref, alpha, lambda1, lambda2, frank):
        theta_ref = float(theta_ref)
        if theta_ref <= 0:
            raise ValueError("theta_ref must be positive")
        n_ref = tuple(float(c) for c in n_ref)
        if len(n_ref) not in (2, 3):
            raise ValueError("n_ref must have 2 or 3 components")
        if abs(float(np.linalg.norm(n_ref)) - 1.0) > 1e-14:
            raise ValueError("n_ref must be a unit vector (to 1e-14)")
        alpha = tuple(a if isinstance(a, ThetaPoly) else ThetaPoly(a)
                      for a in alpha)
        if len(alpha) != 9:
            raise ValueError("need 9 Leslie viscosities alpha0..alpha8")
        frank = tuple(k if isinstance(k, ThetaPoly) else ThetaPoly(k)
                      for k in frank)
        if len(frank) != 4:
            raise ValueError("need 4 Frank constants K1..K4")
        if not isinstance(lambda1, ThetaPoly):
            lambda1 = ThetaPoly(lambda1)
        if not isinstance(lambda2, ThetaPoly):
            lambda2 = ThetaPoly(lambda2)
        for name, val in (("theta_ref", theta_ref),):
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "theta_ref", theta_ref)
        object.__setattr__(self, "n_ref", n_ref)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lambda1", lambda1)
        object.__setattr__(self, "lambda2", lambda2)
        object.__setattr__(self, "frank", frank)

    # -- derived rotational/stretch coefficients ------------------------------

    @cached_property
    def gamma1(self) -> ThetaPoly:
        """Rotational viscosity alpha3 - alpha2 (polynomial identity)."""
        return self.alpha[3] - self.alpha[2]

    @cached_property
    def gamma2(self) -> ThetaPoly:
        """Stretch coefficient alpha6 - alpha5 (polynomial identity)."""
        return self.alpha[6] - self.alpha[5]

    @cached_property
    def n_ref_vector(self) -> np.ndarray:
        v = np.array(self.n_ref)
        v.flags.writeable = False
        return v

    # -- evaluation ------------------------------------------------------------

    def delta(self, theta):
        return np.asarray(theta) - self.theta_ref

    def alpha_at(self, i: int, theta):
        return self.alpha[i](self.delta(theta))

    def lambda_at(self, i: int, theta):
        return (self.lambda1, self.lambda2)[i - 1](self.delta(theta))

    def frank_at(self, i: int, theta):
        """K_i(theta), i in 1..4."""
        return self.frank[i - 1](self.delta(theta))

    def frank_prime_at(self, i: int, theta):
        return self.frank[i - 1].derivative()(self.delta(theta))

    def frank_second_at(self, i: int, theta):
        return self.frank[i - 1].derivative().derivative()(self.delta(theta))

    def gamma1_at(self, theta):
        return self.gamma1(self.delta(theta))

    def gamma2_at(self, theta):
        return self.gamma2(self.delta(theta))

    # -- reference values -------------------------------------------------------

    @property
    def alpha_bar(self) -> tuple[float, ...]:
        return tuple(a.constant for a in self.alpha)

    @property
    def lambda_bar(self) -> tuple[float, float]:
        return (self.lambda1.constant, self.lambda2.constant)

    @property
    def frank_bar(self) -> tuple[float, ...]:
        return tuple(k.constant for k in self.frank)

    @property
    def gamma1_bar(self) -> float:
        return self.gamma1.constant

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "theta_ref": self.theta_ref,
            "n_ref": list(self.n_ref),
            "lambda1": list(self.lambda1.coeffs),
            "lambda2": list(self.lambda2.coeffs),
        }
        for name, poly in zip(ALPHA_NAMES, self.alpha):
            out[name] = list(poly.coeffs)
        for name, poly in zip(FRANK_NAMES, self.frank):
            out[name] = list(poly.coeffs)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientSet":
        missing = [k for k in ("theta_ref", "n_ref") if k not in data]
        if missing:
            raise ValueError(f"missing coefficient keys: {missing}")
        alpha = tuple(ThetaPoly(data.get(name, 0.0)) for name in ALPHA_NAMES)
        if all(name in data for name in FRANK_NAMES):
            frank = tuple(ThetaPoly(data[name]) for name in FRANK_NAMES)
        elif all(k in data for k in ("k11", "k22", "k33", "k24")):
            frank = frank_constants_from_splay_twist_bend(
                data["k11"], data["k22"], data["k33"], data["k24"])
        else:
            frank = tuple(ThetaPoly(data.get(name, 0.0))
                          for name in FRANK_NAMES)
        return cls(
            theta_ref=data["theta_ref"],
            n_ref=data["n_ref"],
            alpha=alpha,
            lambda1=ThetaPoly(data.get("lambda1", 0.0)),
            lambda2=ThetaPoly(data.get("lambda2", 0.0)),
            frank=frank,
        )


def isotropic_coefficients(theta_ref=1.0, n_ref=(1.0, 0.0), alpha4=1.0,
                           lambda1=1.0, K1=1.0) -> CoefficientSet:
    """Minimal admissible set: isotropic viscosity, Fourier heat law,
    one-constant elasticity."""
    alpha = [0.0] * 9
    alpha[4] = alpha4
    return CoefficientSet(theta_ref, n_ref, alpha, lambda1, 0.0,
                          (K1, 0.0, 0.0, 0.0))


def default_nematic_coefficients(dim: int = 2, theta_dependence: bool = True
                                 ) -> CoefficientSet:
    """A second-law-admissible, strongly elliptic anisotropic set.

    gamma1 = 1.2, Parodi-compatible stretch coefficients, mild linear
    temperature dependence unless disabled.
    """
    n_ref = (1.0, 0.0) if dim == 2 else (1.0, 0.0, 0.0)
    eps = 0.05 if theta_dependence else 0.0
    alpha = [0.0,
             (0.1,),
             (-1.0, -eps),
             (0.2, eps / 2),
             (1.0, eps),
             (0.2,),
             (-0.6,),
             0.0,
             0.0]
    return CoefficientSet(
        theta_ref=1.0,
        n_ref=n_ref,
        alpha=alpha,
        lambda1=(1.0, 2 * eps),
        lambda2=(0.3, eps),
        frank=((1.0, eps / 2), (0.1,), (0.2,), (0.05,)),
    )

"""Coefficient sets of three-level two-step linear multistep schemes.

A scheme is written as

    a2*y[n+1] + a1*y[n] + a0*y[n-1] = h*(b2*f[n+1] + b1*f[n] + b0*f[n-1])

with generating polynomials rho(w) = a0 + a1*w + a2*w**2 and
sigma(w) = b0 + b1*w + b2*w**2.  Coefficients are stored in the form the
schemes are usually written in (e.g. 3/2, -2, 1/2 for BDF2); the
``normalized`` view divides everything by a2.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

__all__ = [
    "SchemeFamily",
    "SchemeCoefficients",
    "make_scheme",
    "custom_scheme",
    "order_condition_residuals",
]

Triple = Tuple[float, float, float]


class SchemeFamily(enum.Enum):
    GeneralizedBDF2 = "bdf2"
    GeneralizedAM2 = "am2"
    Custom = "custom"


@dataclass(frozen=True)
class SchemeCoefficients:
    """Raw coefficients ``a = (a0, a1, a2)`` and ``b = (b0, b1, b2)``.

    ``alpha`` is the family parameter and is ``None`` for custom schemes.
    """

    a: Triple
    b: Triple
    alpha: Optional[float]
    family: SchemeFamily

    def __post_init__(self):
        if len(self.a) != 3 or len(self.b) != 3:
            raise ValueError("a two-step scheme needs exactly three a and three b coefficients")
        if not all(math.isfinite(v) for v in (*self.a, *self.b)):
            raise ValueError("scheme coefficients must be finite")
        if self.a[2] == 0.0:
            raise ValueError("leading coefficient a2 must be nonzero")

    @property
    def normalized(self) -> Tuple[Triple, Triple]:
        """Coefficients divided by a2, so that the leading ``a`` entry is 1."""
        s = self.a[2]
        return (
            (self.a[0] / s, self.a[1] / s, 1.0),
            (self.b[0] / s, self.b[1] / s, self.b[2] / s),
        )

    @property
    def is_explicit(self) -> bool:
        return self.b[2] == 0.0

    def rho(self, w):
        a0, a1, a2 = self.a
        return a0 + w * (a1 + w * a2)

    def sigma(self, w):
        b0, b1, b2 = self.b
        return b0 + w * (b1 + w * b2)

    def __str__(self):
        if self.family is SchemeFamily.Custom:
            return f"custom(a={self.a}, b={self.b})"
        return f"{self.family.value}(alpha={self.alpha:g})"


def make_scheme(family: SchemeFamily | str, alpha: float) -> SchemeCoefficients:
    """Build the generalized BDF2 or generalized AM2 scheme at parameter ``alpha``.

    ``alpha = 1`` gives the classical BDF2; for AM2, ``alpha = 1/2`` is the
    trapezoidal rule and ``alpha = 0`` the explicit Adams-Bashforth scheme.
    """
    family = SchemeFamily(family)
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha!r}")
    if family is SchemeFamily.GeneralizedBDF2:
        a = (0.5, -2.0, 1.5)
        b = (alpha - 1.0, 2.0 - 2.0 * alpha, alpha)
    elif family is SchemeFamily.GeneralizedAM2:
        a = (0.0, -1.0, 1.0)
        b = (alpha - 0.5, 1.5 - 2.0 * alpha, alpha)
    else:
        raise ValueError("custom schemes have no parameterization; use custom_scheme()")
    return SchemeCoefficients(a=a, b=b, alpha=alpha, family=family)


def custom_scheme(a: Sequence[float], b: Sequence[float]) -> SchemeCoefficients:
    return SchemeCoefficients(
        a=tuple(float(v) for v in a),
        b=tuple(float(v) for v in b),
        alpha=None,
        family=SchemeFamily.Custom,
    )


def order_condition_residuals(s: SchemeCoefficients) -> Triple:
    """Residuals of the consistency and second-order conditions.

    Expanding ``rho(1+x) - sigma(1+x)*log(1+x)`` in powers of ``x`` gives the
    coefficients returned here; all three vanish iff the scheme has order >= 2:

        (rho(1), rho'(1) - sigma(1), rho''(1)/2 - sigma'(1) + sigma(1)/2)
    """
    a0, a1, a2 = s.a
    b0, b1, b2 = s.b
    rho1 = a0 + a1 + a2
    drho1 = a1 + 2.0 * a2
    half_d2rho1 = a2
    sigma1 = b0 + b1 + b2
    dsigma1 = b1 + 2.0 * b2
    return (rho1, drho1 - sigma1, half_d2rho1 - dsigma1 + 0.5 * sigma1)

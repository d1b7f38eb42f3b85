"""Linear stability analysis of two-step schemes.

Applying a scheme to y' = lam*y with z = lam*h gives the recurrence whose
characteristic polynomial is

    eta(z, w) = rho(w) - z*sigma(w) = a*w**2 + b*w + c.

A-stability means both roots of eta(z, .) lie in the closed unit disc for
every z in the closed left half-plane; for two-step schemes this reduces to
b2 > 0 plus root containment on the imaginary axis, which the Cohn-Schur
inequalities decide without computing roots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import DegeneratePolynomialError, SingularSystemError
from .schemes import SchemeCoefficients, SchemeFamily

__all__ = [
    "CharacteristicCoeffs",
    "StabilityVerdict",
    "CompanionMatrix",
    "RegionRaster",
    "CONTAINMENT_TOL",
    "characteristic_coeffs",
    "quadratic_roots",
    "max_root_modulus",
    "cohn_schur_contained",
    "a_stable_closed_form",
    "a_stable_sampled",
    "stability_region",
    "companion_matrix",
    "spectral_radius",
]

CONTAINMENT_TOL = 1e-12
# |a| below this fraction of max(|b|, |c|) is treated as a vanished leading term.
LEADING_COEFF_EPS = 1e-14

A_STABILITY_THRESHOLD = {
    SchemeFamily.GeneralizedBDF2: 0.75,
    SchemeFamily.GeneralizedAM2: 0.5,
}


class CharacteristicCoeffs(NamedTuple):
    """Coefficients of a*w**2 + b*w + c."""

    a: complex
    b: complex
    c: complex


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    witness: Optional[complex]
    max_root_modulus: float
    n_samples: int = 0

    def __post_init__(self):
        if self.stable and self.witness is not None:
            raise ValueError("a stable verdict carries no witness")
        if not self.stable and self.witness is None:
            raise ValueError("an unstable verdict needs a witness")


@dataclass(frozen=True)
class CompanionMatrix:
    """One-step form V[n+1] = A V[n] of the homogeneous recurrence, V = (y[n-1], y[n])."""

    entries: np.ndarray
    z: complex

    def eigenvalues(self) -> Tuple[complex, complex]:
        m = self.entries
        trace = m[0, 0] + m[1, 1]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        return quadratic_roots(CharacteristicCoeffs(1.0 + 0j, -trace, det))


@dataclass(frozen=True)
class RegionRaster:
    """Max root modulus of eta(z, .) sampled on a rectangular grid.

    ``cells[i, j]`` belongs to ``z = re_min + i*dre + 1j*(im_min + j*dim)``.
    """

    window: Tuple[float, float, float, float]
    resolution: Tuple[int, int]
    cells: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> Tuple[float, float]:
        re_min, re_max, im_min, im_max = self.window
        nx, ny = self.resolution
        return (re_max - re_min) / (nx - 1), (im_max - im_min) / (ny - 1)

    def z_at(self, i: int, j: int) -> complex:
        re_min, _, im_min, _ = self.window
        dre, dim = self.spacing
        return complex(re_min + i * dre, im_min + j * dim)

    def stable_mask(self, tol: float = CONTAINMENT_TOL) -> np.ndarray:
        return self.cells <= 1.0 + tol

    def stable_area(self, tol: float = CONTAINMENT_TOL) -> float:
        dre, dim = self.spacing
        return float(np.count_nonzero(self.stable_mask(tol))) * dre * dim


def characteristic_coeffs(s: SchemeCoefficients, z: complex) -> CharacteristicCoeffs:
    z = complex(z)
    a0, a1, a2 = s.a
    b0, b1, b2 = s.b
    return CharacteristicCoeffs(a2 - b2 * z, a1 - b1 * z, a0 - b0 * z)


def _roots_vec(a, b, c):
    """Both roots of a*w**2 + b*w + c, elementwise, avoiding cancellation.

    Entries whose leading coefficient has vanished get the linear root and an
    infinite second root.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    c = np.asarray(c, dtype=complex)
    a, b, c = np.broadcast_arrays(a, b, c)
    degenerate = np.abs(a) < LEADING_COEFF_EPS * np.maximum(np.abs(b), np.abs(c))
    degenerate |= a == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(b * b - 4.0 * a * c)
        sq = np.where((np.conj(b) * sq).real < 0.0, -sq, sq)
        q = -0.5 * (b + sq)
        w1 = q / a
        w2 = np.where(q == 0, 0.0, c / q)
        lin = -c / b
    w1 = np.where(degenerate, lin, w1)
    w2 = np.where(degenerate, complex(math.inf, 0.0), w2)
    return w1, w2


def quadratic_roots(q: CharacteristicCoeffs) -> Tuple[complex, complex]:
    """Roots of ``a*w**2 + b*w + c``.

    When the leading coefficient is negligible the single linear root is
    returned together with ``inf`` standing in for the root at infinity.
    """
    a, b, c = (complex(v) for v in q)
    if a == 0 and b == 0:
        raise DegeneratePolynomialError("a = b = 0: polynomial has no roots to speak of")
    w1, w2 = _roots_vec(a, b, c)
    return complex(w1), complex(w2)


def max_root_modulus(a, b, c) -> np.ndarray:
    """Elementwise max modulus of the roots of a*w**2 + b*w + c (``inf`` if a vanishes)."""
    w1, w2 = _roots_vec(a, b, c)
    return np.maximum(np.abs(w1), np.abs(w2))


def _cohn_schur_vec(a, b, c, tol):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    c = np.asarray(c, dtype=complex)
    abs_a, abs_c = np.abs(a), np.abs(c)
    scale = np.maximum(np.maximum(abs_a, np.abs(b)), abs_c)
    first = abs_a >= abs_c - tol * scale
    second = np.abs(abs_a**2 - abs_c**2) >= np.abs(a * np.conj(b) - b * np.conj(c)) - tol * scale**2
    contained = first & second
    # With |a| = |c| both inequalities collapse (w**2 - 2.5w + 1 passes them),
    # so decide those cases from the roots themselves.
    tie = np.abs(abs_a - abs_c) <= tol * scale
    if np.any(tie):
        direct = max_root_modulus(a, b, c) <= 1.0 + tol
        contained = np.where(tie, direct, contained)
    return contained


def cohn_schur_contained(q: CharacteristicCoeffs, tol: float = CONTAINMENT_TOL) -> bool:
    """True iff both roots of q lie in the closed unit disc.

    Uses |a| >= |c| and ||a|^2 - |c|^2| >= |a*conj(b) - b*conj(c)|, each relaxed
    by ``tol`` relative to the coefficient scale.
    """
    a, b, c = (complex(v) for v in q)
    if a == 0:
        raise DegeneratePolynomialError("Cohn-Schur test needs a nonzero leading coefficient")
    return bool(_cohn_schur_vec(a, b, c, tol))


def a_stable_closed_form(family: SchemeFamily | str, alpha: float) -> bool:
    family = SchemeFamily(family)
    if family not in A_STABILITY_THRESHOLD:
        raise ValueError("no closed-form A-stability condition for custom schemes")
    return alpha >= A_STABILITY_THRESHOLD[family]


def a_stable_sampled(
    s: SchemeCoefficients,
    n_samples: int,
    delta: float = 1e-6,
    tol: float = CONTAINMENT_TOL,
) -> StabilityVerdict:
    """Check A-stability by sampling the imaginary axis.

    Samples are z = i*tan(theta) with theta evenly spaced on
    (-pi/2 + delta, pi/2 - delta), plus z = 0.  A stable verdict is evidence
    only: a violation between samples goes unnoticed.
    """
    if n_samples < 3:
        raise ValueError("need at least 3 samples")
    (a0, a1, _), (b0, b1, b2) = s.normalized
    theta = np.linspace(-0.5 * math.pi + delta, 0.5 * math.pi - delta, n_samples)
    t = np.tan(theta)
    if not np.any(t == 0.0):
        t = np.insert(t, np.searchsorted(t, 0.0), 0.0)
    z = 1j * t
    a, b, c = 1.0 - b2 * z, a1 - b1 * z, a0 - b0 * z
    contained = _cohn_schur_vec(a, b, c, tol)
    moduli = max_root_modulus(a, b, c)

    bad = np.flatnonzero(~contained)
    if bad.size:
        k = bad[0]
        return StabilityVerdict(False, complex(z[k]), float(moduli[k]), n_samples)
    if b2 < 0:
        # leading coefficient vanishes at the negative real point z = 1/b2
        return StabilityVerdict(False, complex(1.0 / b2), math.inf, n_samples)
    if b2 == 0:
        k = int(np.argmax(moduli))
        return StabilityVerdict(False, complex(z[k]), float(moduli[k]), n_samples)
    return StabilityVerdict(True, None, float(moduli.max()), n_samples)


def stability_region(
    s: SchemeCoefficients,
    window: Tuple[float, float, float, float],
    resolution: Tuple[int, int],
) -> RegionRaster:
    re_min, re_max, im_min, im_max = (float(v) for v in window)
    nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 x 2")
    if not (re_max > re_min and im_max > im_min):
        raise ValueError(f"degenerate window {window}")
    dre = (re_max - re_min) / (nx - 1)
    dim = (im_max - im_min) / (ny - 1)
    re = re_min + np.arange(nx) * dre
    im = im_min + np.arange(ny) * dim
    z = re[:, None] + 1j * im[None, :]
    a0, a1, a2 = s.a
    b0, b1, b2 = s.b
    cells = max_root_modulus(a2 - b2 * z, a1 - b1 * z, a0 - b0 * z)
    return RegionRaster((re_min, re_max, im_min, im_max), (nx, ny), cells)


def companion_matrix(s: SchemeCoefficients, z: complex) -> CompanionMatrix:
    z = complex(z)
    (a0, a1, _), (b0, b1, b2) = s.normalized
    den = 1.0 - b2 * z
    if abs(den) <= LEADING_COEFF_EPS * max(1.0, abs(b2 * z)):
        raise SingularSystemError(f"1 - b2*z vanishes at z = {z}")
    entries = np.array(
        [[0.0, 1.0], [(-a0 + b0 * z) / den, (-a1 + b1 * z) / den]],
        dtype=complex,
    )
    return CompanionMatrix(entries, z)


def spectral_radius(m: CompanionMatrix) -> float:
    return max(abs(lam) for lam in m.eigenvalues())

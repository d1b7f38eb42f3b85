"""G-norm energy machinery for generalized BDF2.

With V[n] = (y[n-1], y[n]) and

    G = 1/4 * [[2a - 1, -2a], [-2a, 2a + 3]],

the BDF2 difference operator paired with the b-weighted combination
telescopes:

    <3/2 y[n+1] - 2 y[n] + 1/2 y[n-1], a y[n+1] + (2-2a) y[n] + (a-1) y[n-1]>
        = |V[n+1]|_G^2 - |V[n]|_G^2 + (4a-3)/4 |y[n+1] - 2 y[n] + y[n-1]|^2.

Vector states use the blockwise form (G Kronecker identity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.linalg as sla

from .integrators import LinearSkewProblem, Trajectory

__all__ = [
    "GMatrix",
    "EnergyRecord",
    "EnergySeries",
    "g_norm_sq",
    "bdf2_energy_identity_residual",
    "gnorm_equivalence_constants",
    "max_step_bdf2",
    "skew_dominance_constant",
    "contraction_factor",
    "forcing_budget",
    "energy_series",
    "BOUNDED_RATIO",
]

BOUNDED_RATIO = 1.05


@dataclass(frozen=True)
class GMatrix:
    alpha: float

    @property
    def entries(self) -> np.ndarray:
        a = self.alpha
        return 0.25 * np.array([[2 * a - 1, -2 * a], [-2 * a, 2 * a + 3]])

    @property
    def det(self) -> float:
        return (4 * self.alpha - 3) / 16

    def eigenvalues(self) -> Tuple[float, float]:
        """(lambda_min, lambda_max) = 1/4 + (a -+ sqrt(a^2 + 1))/2."""
        a = self.alpha
        r = math.sqrt(a * a + 1.0)
        return 0.25 + 0.5 * (a - r), 0.25 + 0.5 * (a + r)

    @property
    def is_positive_definite(self) -> bool:
        return self.alpha > 0.75


def _pair(y_prev, y_cur):
    u = np.atleast_1d(np.asarray(y_prev, dtype=float))
    v = np.atleast_1d(np.asarray(y_cur, dtype=float))
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return u, v


def g_norm_sq(y_prev, y_cur, alpha: float) -> float:
    """|V|_G^2 for V = (y_prev, y_cur)."""
    u, v = _pair(y_prev, y_cur)
    (g00, g01), (_, g11) = GMatrix(alpha).entries
    return float(g00 * (u @ u) + 2.0 * g01 * (u @ v) + g11 * (v @ v))


def bdf2_energy_identity_residual(y_prev, y_cur, y_next, alpha: float) -> float:
    """Left side minus right side of the BDF2 G-norm identity (zero up to rounding)."""
    u, v = _pair(y_prev, y_cur)
    w, _ = _pair(y_next, y_cur)
    lhs = (1.5 * w - 2.0 * v + 0.5 * u) @ (alpha * w + (2.0 - 2.0 * alpha) * v + (alpha - 1.0) * u)
    d2 = w - 2.0 * v + u
    rhs = g_norm_sq(v, w, alpha) - g_norm_sq(u, v, alpha) + (4.0 * alpha - 3.0) / 4.0 * (d2 @ d2)
    return float(lhs - rhs)


def gnorm_equivalence_constants(alpha: float) -> Tuple[float, float]:
    """(lambda_min, lambda_max) of G, so lambda_min |V|^2 <= |V|_G^2 <= lambda_max |V|^2."""
    if not alpha > 0.75:
        raise ValueError(f"G is not positive definite for alpha={alpha} (need alpha > 3/4)")
    return GMatrix(alpha).eigenvalues()


def max_step_bdf2(alpha: float, l0: float, c1: float) -> float:
    """Largest h with h*(l0(a-1)^2/2 + (a-1)^2/2 + a^2/(2 c1)) <= (4a-3)/4."""
    if not alpha >= 0.75:
        raise ValueError(f"step restriction needs alpha >= 3/4, got {alpha}")
    if not (l0 > 0 and c1 > 0):
        raise ValueError("l0 and c1 must be positive")
    d = (alpha - 1.0) ** 2
    denom = 0.5 * l0 * d + 0.5 * d + alpha**2 / (2.0 * c1)
    if denom == 0.0:
        return math.inf
    return (4.0 * alpha - 3.0) / 4.0 / denom


def skew_dominance_constant(p: LinearSkewProblem) -> float:
    """Largest C1 with <L y, y> >= C1 |Ls y|^2 for all y.

    Equals 1 / (largest eigenvalue of the pencil (Ls^T Ls, L)); this form stays
    well posed when Ls is singular.
    """
    B = p.Ls.T @ p.Ls
    if not np.any(B):
        return math.inf
    mu = sla.eigh(B, p.L, eigvals_only=True)[-1]
    return math.inf if mu <= 0 else float(1.0 / mu)


def contraction_factor(alpha: float, h: float, l0: float) -> float:
    """C_a = min(1 + h l0 C_l / 32, 3) with C_l the smallest eigenvalue of G."""
    c_l = gnorm_equivalence_constants(alpha)[0]
    return min(1.0 + h * l0 * c_l / 32.0, 3.0)


def forcing_budget(h: float, l0: float, g_sup: float) -> float:
    """Per-step forcing allowance h (1/2 + 2/l0) sup|g|^2."""
    return h * (0.5 + 2.0 / l0) * g_sup**2


@dataclass(frozen=True)
class EnergyRecord:
    n: int
    g_norm_sq: float
    e_n: float


@dataclass
class EnergySeries:
    records: List[EnergyRecord]
    bounded: bool

    @property
    def e(self) -> np.ndarray:
        return np.array([r.e_n for r in self.records])

    @property
    def g(self) -> np.ndarray:
        return np.array([r.g_norm_sq for r in self.records])


def _head_tail_bounded(values: np.ndarray) -> bool:
    if not np.all(np.isfinite(values)):
        return False
    half = len(values) // 2
    if half == 0:
        return True
    return bool(values[half:].max() <= BOUNDED_RATIO * values[:half].max())


def energy_series(traj: Trajectory, alpha: float, h: float, l0: float) -> EnergySeries:
    """E[n] = |V[n]|_G^2 + (h l0/32)|y[n]|^2 for n = 1 .. N.

    The run counts as uniformly bounded when the largest E over the second
    half of the records is at most 5% above the largest over the first half.
    A trajectory cut short by overflow is never bounded.
    """
    y = np.asarray(traj.states, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if len(y) < 2:
        raise ValueError("need at least two states")
    (g00, g01), (_, g11) = GMatrix(alpha).entries
    with np.errstate(over="ignore", invalid="ignore"):
        u, v = y[:-1], y[1:]
        uu = np.einsum("ij,ij->i", u, u)
        uv = np.einsum("ij,ij->i", u, v)
        vv = np.einsum("ij,ij->i", v, v)
        gn = g00 * uu + 2.0 * g01 * uv + g11 * vv
        en = gn + h * l0 / 32.0 * vv
    records = [EnergyRecord(n + 1, float(a), float(b)) for n, (a, b) in enumerate(zip(gn, en))]
    bounded = _head_tail_bounded(en) and not getattr(traj, "blew_up", False)
    return EnergySeries(records, bounded)

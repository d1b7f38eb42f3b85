"""Fixed-step two-step integrators.

Problems have the form y' + L y + Ls y = g(t) with L symmetric positive
definite and Ls skew-symmetric.  Four time steppers are provided:

* the monolithic two-step scheme (any ``SchemeCoefficients``), implicit in L + Ls;
* IMEX-BDF2: generalized BDF2 on L, Gear extrapolation 2y[n] - y[n-1] on Ls;
* IMEX-AM-AB2: generalized AM2 on L, Adams-Bashforth 3/2 y[n] - 1/2 y[n-1] on Ls.

``step_lmm`` additionally handles a general right-hand side f(t, y) through
Newton iteration.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, SingularSystemError
from .schemes import SchemeCoefficients, SchemeFamily

__all__ = [
    "Starter",
    "Stepper",
    "ForcingMode",
    "StepperConfig",
    "LinearSkewProblem",
    "Trajectory",
    "AffineRHS",
    "LinearMultistep",
    "ImexBDF2",
    "ImexAMAB2",
    "start",
    "step_lmm",
    "step_imex_bdf2",
    "step_imex_amab2",
    "make_stepper",
    "integrate",
    "OVERFLOW_THRESHOLD",
]

OVERFLOW_THRESHOLD = 1e150


class Starter(enum.Enum):
    ExactInjection = "exact"
    TrapezoidOneStep = "trapezoid"


class Stepper(enum.Enum):
    LMM = "lmm"
    IMEX_BDF2 = "imex-bdf2"
    IMEX_AMAB2 = "imex-amab2"


class ForcingMode(enum.Enum):
    """How the monolithic scheme samples the forcing g.

    ``COLLOCATED`` evaluates g once at the sigma-weighted time
    sum(b_m * t[n-1+m]) / sigma(1), i.e. t[n+1] for BDF2 and t[n+1/2] for AM2;
    this is second order and matches the forcing treatment of the IMEX
    schemes.  ``WEIGHTED`` applies the b coefficients to g[n-1], g[n], g[n+1]
    exactly as for the rest of f.
    """

    COLLOCATED = "collocated"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class StepperConfig:
    scheme: SchemeCoefficients
    h: float
    starter: Starter = Starter.ExactInjection
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"step size must be positive, got {self.h}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")


def _as_matrix(m, dim=None) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    return m


@dataclass(eq=False)
class LinearSkewProblem:
    """IVP y' + L y + Ls y = g(t), y(0) = y0.

    ``forcing`` maps t to a vector of length ``dim``; objects that also
    provide ``values(times)`` are evaluated in bulk by :func:`integrate`.
    ``exact``, when present, maps t to the exact solution.
    """

    L: np.ndarray
    Ls: np.ndarray
    forcing: Callable[[float], np.ndarray]
    y0: np.ndarray
    exact: Optional[Callable[[float], np.ndarray]] = None
    name: str = "custom"
    l0: float = field(init=False)

    def __post_init__(self):
        self.L = _as_matrix(self.L)
        self.Ls = _as_matrix(self.Ls, self.L.shape[0])
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=float)).copy()
        if self.y0.shape != (self.dim,):
            raise ValueError(f"y0 has shape {self.y0.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(self.y0)):
            raise ValueError("y0 must be finite")
        norm_l = np.linalg.norm(self.L)
        if np.linalg.norm(self.L - self.L.T) > 1e-12 * norm_l:
            raise ValueError("L must be symmetric")
        if np.linalg.norm(self.Ls + self.Ls.T) > 1e-12 * max(np.linalg.norm(self.Ls), 1.0):
            raise ValueError("Ls must be skew-symmetric")
        self.l0 = float(np.linalg.eigvalsh(self.L)[0])
        if not self.l0 > 0:
            raise ValueError(f"L must be positive definite (smallest eigenvalue {self.l0:g})")

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    @property
    def operator(self) -> np.ndarray:
        """M = L + Ls, so that y' = -M y + g."""
        return self.L + self.Ls

    def g(self, t: float) -> np.ndarray:
        return np.asarray(self.forcing(t), dtype=float).reshape(self.dim)

    def forcing_values(self, times: np.ndarray) -> np.ndarray:
        bulk = getattr(self.forcing, "values", None)
        if bulk is not None:
            return np.asarray(bulk(times), dtype=float).reshape(len(times), self.dim)
        return np.array([self.g(t) for t in times]).reshape(len(times), self.dim)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return -self.operator @ y + self.g(t)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    blew_up: bool = False

    def __len__(self):
        return len(self.times)

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class AffineRHS:
    """f(t, y) = A y + g(t); lets :func:`step_lmm` use a direct linear solve."""

    A: np.ndarray
    g: Optional[Callable[[float], np.ndarray]] = None

    def __call__(self, t, y):
        out = np.atleast_2d(self.A) @ np.atleast_1d(y)
        if self.g is not None:
            out = out + np.atleast_1d(self.g(t))
        return out


def start(p: LinearSkewProblem, cfg: StepperConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Initial pair (y0, y1) for a two-step method."""
    h = cfg.h
    y0 = p.y0.copy()
    if cfg.starter is Starter.ExactInjection:
        if p.exact is None:
            raise ValueError(f"problem {p.name!r} has no exact solution to inject")
        y1 = np.asarray(p.exact(h), dtype=float).reshape(p.dim)
    else:
        M = p.operator
        eye = np.eye(p.dim)
        rhs = (eye - 0.5 * h * M) @ y0 + 0.5 * h * (p.g(0.0) + p.g(h))
        y1 = _solve_dense(eye + 0.5 * h * M, rhs)
    return y0, y1


def _solve_dense(A, b):
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("implicit system is numerically singular")
    return x


def _fd_jacobian(f, t, y, fy):
    n = y.size
    J = np.empty((fy.size, n))
    for k in range(n):
        dk = 1e-7 * max(1.0, abs(y[k]))
        yp = y.copy()
        yp[k] += dk
        J[:, k] = (np.atleast_1d(f(t, yp)) - fy) / dk
    return J


def step_lmm(
    s: SchemeCoefficients,
    f: Callable,
    t_n: float,
    y_prev,
    y_cur,
    h: float,
    *,
    jac: Optional[Callable] = None,
    newton_tol: float = 1e-12,
    newton_max_iter: int = 50,
) -> np.ndarray:
    """One step of the two-step scheme for y' = f(t, y).

    Solves a2*y - h*b2*f(t[n+1], y) = -a1*y[n] - a0*y[n-1] + h*(b1*f[n] + b0*f[n-1]).
    ``AffineRHS`` right-hand sides and explicit schemes are solved directly;
    anything else by Newton's method started from 2*y[n] - y[n-1], using
    ``jac(t, y)`` if given and forward differences otherwise.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    shape = np.shape(y_cur)
    ym = np.atleast_1d(np.asarray(y_prev, dtype=float))
    yc = np.atleast_1d(np.asarray(y_cur, dtype=float))
    a0, a1, a2 = s.a
    b0, b1, b2 = s.b
    t_next = t_n + h
    rhs = -a1 * yc - a0 * ym
    if b1:
        rhs = rhs + h * b1 * np.atleast_1d(f(t_n, yc))
    if b0:
        rhs = rhs + h * b0 * np.atleast_1d(f(t_n - h, ym))

    eye = np.eye(yc.size)
    if b2 == 0.0:
        y = rhs / a2
    elif isinstance(f, AffineRHS):
        A = np.atleast_2d(f.A)
        extra = h * b2 * np.atleast_1d(f.g(t_next)) if f.g is not None else 0.0
        y = _solve_dense(a2 * eye - h * b2 * A, rhs + extra)
    else:
        y = 2.0 * yc - ym
        for _ in range(newton_max_iter):
            fy = np.atleast_1d(f(t_next, y))
            resid = a2 * y - h * b2 * fy - rhs
            J = np.atleast_2d(jac(t_next, y)) if jac is not None else _fd_jacobian(f, t_next, y, fy)
            dy = _solve_dense(a2 * eye - h * b2 * J, -resid)
            y = y + dy
            if np.linalg.norm(dy) <= newton_tol * max(1.0, np.linalg.norm(y)):
                break
        else:
            raise ConvergenceError(f"Newton did not converge in {newton_max_iter} iterations at t={t_next:g}")
    return y.reshape(shape)


class _LinearTwoStep:
    """y[n+1] = K_cur y[n] + K_prev y[n-1] + sum_k K_k g(t[n] + offset_k*h).

    The implicit matrix is factored once and applied to every right-hand
    side term up front, so a step costs a few mat-vecs.
    """

    def __init__(self, implicit, cur, prev, forcing_terms, h, symmetric=False):
        self.h = h
        if symmetric:
            try:
                factor = sla.cho_factor(implicit)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError("implicit matrix is not positive definite") from exc
            solve = lambda B: sla.cho_solve(factor, B)  # noqa: E731
        else:
            try:
                lu = sla.lu_factor(implicit, check_finite=True)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise SingularSystemError(str(exc)) from exc
            if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.max(np.abs(implicit)):
                raise SingularSystemError("implicit matrix is singular")
            solve = lambda B: sla.lu_solve(lu, B)  # noqa: E731
        self.K_cur = solve(cur)
        self.K_prev = solve(prev)
        self.forcing_terms = [(off, solve(W)) for off, W in forcing_terms]

    def step(self, p: LinearSkewProblem, t_n, y_prev, y_cur) -> np.ndarray:
        y = self.K_cur @ np.asarray(y_cur, dtype=float) + self.K_prev @ np.asarray(y_prev, dtype=float)
        for off, K in self.forcing_terms:
            y = y + K @ p.g(t_n + off * self.h)
        return y

    def forcing_increments(self, p: LinearSkewProblem, n_steps: int) -> np.ndarray:
        """Forcing contribution for the steps from t[n], n = 1 .. n_steps."""
        t = np.arange(1, n_steps + 1) * self.h
        out = np.zeros((n_steps, p.dim))
        for off, K in self.forcing_terms:
            out += p.forcing_values(t + off * self.h) @ K.T
        return out


class LinearMultistep(_LinearTwoStep):
    """Monolithic scheme on y' = -(L + Ls) y + g."""

    def __init__(self, s: SchemeCoefficients, p: LinearSkewProblem, h: float,
                 forcing: ForcingMode = ForcingMode.COLLOCATED):
        a0, a1, a2 = s.a
        b0, b1, b2 = s.b
        M = p.operator
        eye = np.eye(p.dim)
        forcing = ForcingMode(forcing)
        sigma1 = b0 + b1 + b2
        if forcing is ForcingMode.COLLOCATED and sigma1 != 0.0:
            terms = [((b2 - b0) / sigma1, h * sigma1 * eye)]
        else:
            terms = [(off, h * bm * eye) for off, bm in ((1.0, b2), (0.0, b1), (-1.0, b0)) if bm]
        super().__init__(a2 * eye + h * b2 * M, -a1 * eye - h * b1 * M, -a0 * eye - h * b0 * M, terms, h)


class ImexBDF2(_LinearTwoStep):
    """(3/2 I + h a L) y[n+1] = 2y[n] - y[n-1]/2 - hL((2-2a)y[n] + (a-1)y[n-1])
    - h Ls (2y[n] - y[n-1]) + h g(t[n+1])."""

    def __init__(self, alpha: float, p: LinearSkewProblem, h: float):
        if not h > 0:
            raise ValueError("h must be positive")
        L, Ls, eye = p.L, p.Ls, np.eye(p.dim)
        super().__init__(
            1.5 * eye + h * alpha * L,
            2.0 * eye - h * (2.0 - 2.0 * alpha) * L - 2.0 * h * Ls,
            -0.5 * eye - h * (alpha - 1.0) * L + h * Ls,
            [(1.0, h * eye)],
            h,
            symmetric=True,
        )


class ImexAMAB2(_LinearTwoStep):
    """(I + h a L) y[n+1] = y[n] - hL((3/2-2a)y[n] + (a-1/2)y[n-1])
    - h Ls (3/2 y[n] - 1/2 y[n-1]) + h g(t[n] + h/2)."""

    def __init__(self, alpha: float, p: LinearSkewProblem, h: float):
        if not h > 0:
            raise ValueError("h must be positive")
        L, Ls, eye = p.L, p.Ls, np.eye(p.dim)
        super().__init__(
            eye + h * alpha * L,
            eye - h * (1.5 - 2.0 * alpha) * L - 1.5 * h * Ls,
            -h * (alpha - 0.5) * L + 0.5 * h * Ls,
            [(0.5, h * eye)],
            h,
            symmetric=True,
        )


def step_imex_bdf2(alpha, p: LinearSkewProblem, t_n, y_prev, y_cur, h) -> np.ndarray:
    return ImexBDF2(alpha, p, h).step(p, t_n, y_prev, y_cur)


def step_imex_amab2(alpha, p: LinearSkewProblem, t_n, y_prev, y_cur, h) -> np.ndarray:
    return ImexAMAB2(alpha, p, h).step(p, t_n, y_prev, y_cur)


def make_stepper(p: LinearSkewProblem, cfg: StepperConfig, stepper: Stepper,
                 forcing: ForcingMode = ForcingMode.COLLOCATED) -> _LinearTwoStep:
    stepper = Stepper(stepper)
    s = cfg.scheme
    if stepper is Stepper.LMM:
        return LinearMultistep(s, p, cfg.h, forcing)
    expected = SchemeFamily.GeneralizedBDF2 if stepper is Stepper.IMEX_BDF2 else SchemeFamily.GeneralizedAM2
    if s.family is not expected:
        raise ValueError(f"{stepper.value} needs a {expected.value} scheme, got {s}")
    cls = ImexBDF2 if stepper is Stepper.IMEX_BDF2 else ImexAMAB2
    return cls(s.alpha, p, cfg.h)


def steps_for(t_end: float, h: float) -> int:
    """Number of uniform steps of size h reaching t_end; rejects non-commensurate t_end."""
    n = round(t_end / h)
    if n < 1 or abs(n * h - t_end) > 1e-9 * abs(t_end):
        raise ValueError(f"t_end={t_end!r} is not a positive integer multiple of h={h!r}")
    return n


def integrate(
    p: LinearSkewProblem,
    cfg: StepperConfig,
    stepper: Stepper | str,
    t_end: float,
    *,
    forcing: ForcingMode = ForcingMode.COLLOCATED,
    overflow: float = OVERFLOW_THRESHOLD,
) -> Trajectory:
    """Integrate from t = 0 to t_end with uniform step cfg.h.

    If any component exceeds ``overflow`` in magnitude the trajectory is cut
    after that state and returned with ``blew_up=True``.
    """
    h = cfg.h
    n_steps = steps_for(t_end, h)
    impl = make_stepper(p, cfg, stepper, forcing)
    y0, y1 = start(p, cfg)
    states = np.empty((n_steps + 1, p.dim))
    states[0], states[1] = y0, y1
    blew_up = bool(np.max(np.abs(y1)) > overflow)
    last = 1
    if n_steps > 1 and not blew_up:
        incr = impl.forcing_increments(p, n_steps - 1)
        K_cur, K_prev = impl.K_cur, impl.K_prev
        y_prev, y_cur = y0, y1
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(1, n_steps):
                y_next = K_cur @ y_cur + K_prev @ y_prev + incr[n - 1]
                states[n + 1] = y_next
                last = n + 1
                if not np.max(np.abs(y_next)) <= overflow:
                    blew_up = True
                    break
                y_prev, y_cur = y_cur, y_next
    times = np.arange(last + 1) * h
    return Trajectory(times, states[: last + 1].copy(), blew_up)

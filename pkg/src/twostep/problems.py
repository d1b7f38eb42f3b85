"""Benchmark initial value problems with exact-solution oracles.

All problems are linear, y' + (L + Ls) y = g(t), with g a finite sum of
sines, cosines and constants.  The exact solution is assembled at runtime:
the particular part for each frequency comes from solving a small real
matching system, the homogeneous part from a matrix exponential.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import InputFormatError
from .integrators import LinearSkewProblem

__all__ = [
    "ForcingTerm",
    "TrigForcing",
    "ExactSolution",
    "BenchmarkId",
    "linear_problem",
    "build",
    "exact_solution",
    "load_problem",
    "ROTATION",
]

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])

_KINDS = ("sin", "cos", "const")


@dataclass(frozen=True)
class ForcingTerm:
    """``coef * sin(omega t)``, ``coef * cos(omega t)`` or ``coef`` in one component."""

    component: int
    kind: str
    coef: float
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if not (math.isfinite(self.coef) and math.isfinite(self.omega)):
            raise ValueError("forcing coefficients must be finite")
        if self.omega < 0:
            raise ValueError("use a nonnegative frequency (flip the sign of the coefficient instead)")


class TrigForcing:
    """Vector forcing built from :class:`ForcingTerm` entries."""

    def __init__(self, dim: int, terms: Iterable[ForcingTerm] = ()):
        self.dim = int(dim)
        self.terms: Tuple[ForcingTerm, ...] = tuple(terms)
        for term in self.terms:
            if not 0 <= term.component < self.dim:
                raise ValueError(f"forcing component {term.component} out of range for dim {self.dim}")

    def __call__(self, t: float) -> np.ndarray:
        return self.values(np.array([float(t)]))[0]

    def values(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        out = np.zeros((times.size, self.dim))
        for term in self.terms:
            if term.kind == "sin":
                out[:, term.component] += term.coef * np.sin(term.omega * times)
            elif term.kind == "cos":
                out[:, term.component] += term.coef * np.cos(term.omega * times)
            else:
                out[:, term.component] += term.coef
        return out

    def sup_bound(self) -> float:
        """Upper bound on sup_t ||g(t)|| (Euclidean)."""
        per_comp = np.zeros(self.dim)
        for term in self.terms:
            per_comp[term.component] += abs(term.coef)
        return float(np.linalg.norm(per_comp))

    def by_frequency(self) -> Dict[float, Tuple[np.ndarray, np.ndarray]]:
        """Group terms as {omega: (sin coefficients, cos coefficients)}; constants sit at omega 0."""
        groups: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}
        for term in self.terms:
            omega = 0.0 if term.kind == "const" else term.omega
            s, c = groups.setdefault(omega, (np.zeros(self.dim), np.zeros(self.dim)))
            if term.kind == "sin":
                s[term.component] += term.coef
            else:
                c[term.component] += term.coef
        return groups


class ExactSolution:
    """Exact solution of y' + M y = g(t), y(0) = y0, for trigonometric g.

    For each frequency w the particular solution p(t) = P sin(wt) + Q cos(wt)
    satisfies  M P - w Q = s  and  w P + M Q = c,  where s and c are the sine
    and cosine coefficients of g at that frequency.
    """

    def __init__(self, M: np.ndarray, y0: np.ndarray, forcing: TrigForcing):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        n = self.M.shape[0]
        eye = np.eye(n)
        self._modes: List[Tuple[float, np.ndarray, np.ndarray]] = []
        for omega, (s, c) in sorted(forcing.by_frequency().items()):
            if omega == 0.0:
                P = np.zeros(n)
                Q = np.linalg.solve(self.M, c)
            else:
                block = np.block([[self.M, -omega * eye], [omega * eye, self.M]])
                PQ = np.linalg.solve(block, np.concatenate([s, c]))
                P, Q = PQ[:n], PQ[n:]
            self._modes.append((omega, P, Q))
        self._h0 = np.asarray(y0, dtype=float) - self.particular(0.0)

    def particular(self, t: float) -> np.ndarray:
        out = np.zeros(self.M.shape[0])
        for omega, P, Q in self._modes:
            out += P * math.sin(omega * t) + Q * math.cos(omega * t)
        return out

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        return sla.expm(-t * self.M) @ self._h0 + self.particular(t)


class BenchmarkId(enum.Enum):
    DampedDriven = "damped-driven"
    DampedDrivenSkew = "damped-driven-skew"
    DampedDrivenSkew2 = "damped-driven-skew2"
    ScalarDahlquist = "dahlquist"
    Custom = "custom"


def _nonperiodic_forcing(dim: int) -> TrigForcing:
    """sin(t) + cos(sqrt(2) t) in the first component."""
    return TrigForcing(dim, [ForcingTerm(0, "sin", 1.0, 1.0), ForcingTerm(0, "cos", 1.0, math.sqrt(2.0))])


def linear_problem(L, Ls, forcing: TrigForcing, y0, name: str = "custom") -> LinearSkewProblem:
    """Problem with an exact-solution oracle attached."""
    p = LinearSkewProblem(L=L, Ls=Ls, forcing=forcing, y0=y0, name=name)
    p.exact = ExactSolution(p.operator, p.y0, forcing)
    return p


def build(benchmark: BenchmarkId | str, *, lam: Optional[complex] = None, y0=None,
          path: Optional[str | os.PathLike] = None) -> LinearSkewProblem:
    """Construct a benchmark problem.

    ``lam`` is required for ``ScalarDahlquist`` (y' = lam y, Re lam < 0, which
    is stored in real form: 1-D if lam is real, otherwise 2-D with a rotation
    block).  ``path`` is required for ``Custom``.  ``y0`` overrides the
    initial value.
    """
    benchmark = BenchmarkId(benchmark)
    if benchmark is BenchmarkId.DampedDriven:
        L, Ls, g, init = [[10.0]], [[0.0]], _nonperiodic_forcing(1), [1.0]
    elif benchmark in (BenchmarkId.DampedDrivenSkew, BenchmarkId.DampedDrivenSkew2):
        kappa = 1.0 if benchmark is BenchmarkId.DampedDrivenSkew else 4.0
        L, Ls, g, init = 10.0 * np.eye(2), kappa * ROTATION, _nonperiodic_forcing(2), [1.0, 0.0]
    elif benchmark is BenchmarkId.ScalarDahlquist:
        if lam is None:
            raise ValueError("ScalarDahlquist needs lam")
        lam = complex(lam)
        if not lam.real < 0:
            raise ValueError(f"need Re(lam) < 0, got {lam}")
        if lam.imag == 0:
            L, Ls, init = [[-lam.real]], [[0.0]], [1.0]
        else:
            L, Ls, init = -lam.real * np.eye(2), -lam.imag * ROTATION, [1.0, 0.0]
        g = TrigForcing(len(init))
    else:
        if path is None:
            raise ValueError("custom problems are loaded from a file; pass path=")
        p = load_problem(path)
        return p if y0 is None else linear_problem(p.L, p.Ls, p.forcing, y0, p.name)
    return linear_problem(L, Ls, g, init if y0 is None else y0, name=benchmark.value)


def exact_solution(benchmark: BenchmarkId | str, t: float, *, lam: Optional[complex] = None) -> np.ndarray:
    benchmark = BenchmarkId(benchmark)
    if benchmark is BenchmarkId.Custom:
        raise ValueError("custom problems have no built-in oracle; use build(..., path=...).exact")
    return build(benchmark, lam=lam).exact(t)


def _floats(tokens: Sequence[str], where: str) -> List[float]:
    try:
        vals = [float(tok) for tok in tokens]
    except ValueError as exc:
        raise InputFormatError(f"{where}: {exc}") from None
    if not all(math.isfinite(v) for v in vals):
        raise InputFormatError(f"{where}: values must be finite")
    return vals


def load_problem(path: str | os.PathLike) -> LinearSkewProblem:
    """Read a problem description file (format in docs/problem_format.md)."""
    with open(path, encoding="utf-8") as fh:
        lines = [(k + 1, ln.split("#", 1)[0].split()) for k, ln in enumerate(fh)]
    lines = [(k, toks) for k, toks in lines if toks]

    dim = None
    mats: Dict[str, np.ndarray] = {}
    y0 = None
    terms: List[ForcingTerm] = []
    i = 0
    while i < len(lines):
        lineno, toks = lines[i]
        where = f"{path}:{lineno}"
        key = toks[0]
        if key == "dim":
            if len(toks) != 2 or not toks[1].isdigit() or int(toks[1]) < 1:
                raise InputFormatError(f"{where}: expected 'dim <positive integer>'")
            dim = int(toks[1])
        elif dim is None:
            raise InputFormatError(f"{where}: 'dim' must come first")
        elif key in ("L", "Ls"):
            if len(toks) != 1:
                raise InputFormatError(f"{where}: '{key}' stands alone; rows follow on the next lines")
            if key in mats:
                raise InputFormatError(f"{where}: {key} given twice")
            rows = lines[i + 1 : i + 1 + dim]
            if len(rows) < dim:
                raise InputFormatError(f"{where}: {key} needs {dim} rows")
            mat = []
            for rl, rt in rows:
                vals = _floats(rt, f"{path}:{rl}")
                if len(vals) != dim:
                    raise InputFormatError(f"{path}:{rl}: expected {dim} entries, got {len(vals)}")
                mat.append(vals)
            mats[key] = np.array(mat)
            i += dim
        elif key == "y0":
            y0 = _floats(toks[1:], where)
            if len(y0) != dim:
                raise InputFormatError(f"{where}: y0 needs {dim} entries")
        elif key == "forcing":
            if len(toks) < 4:
                raise InputFormatError(f"{where}: expected 'forcing <component> sin|cos|const <coef> [omega]'")
            try:
                comp = int(toks[1])
            except ValueError:
                raise InputFormatError(f"{where}: component must be an integer") from None
            kind = toks[2]
            if kind not in _KINDS:
                raise InputFormatError(f"{where}: kind must be sin, cos or const")
            nums = _floats(toks[3:], where)
            if kind == "const" and len(nums) != 1 or kind != "const" and len(nums) != 2:
                raise InputFormatError(f"{where}: wrong number of values for a {kind} term")
            if not 0 <= comp < dim:
                raise InputFormatError(f"{where}: component {comp} out of range")
            try:
                terms.append(ForcingTerm(comp, kind, *nums))
            except ValueError as exc:
                raise InputFormatError(f"{where}: {exc}") from None
        else:
            raise InputFormatError(f"{where}: unknown keyword {key!r}")
        i += 1

    if dim is None or "L" not in mats or y0 is None:
        raise InputFormatError(f"{path}: 'dim', 'L' and 'y0' are required")
    Ls = mats.get("Ls", np.zeros((dim, dim)))
    try:
        return linear_problem(mats["L"], Ls, TrigForcing(dim, terms), y0, name=os.path.basename(os.fspath(path)))
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None

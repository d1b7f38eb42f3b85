"""Command-line experiment harness.

Every numerical command writes CSV files (one per command and alpha) into
``--out`` and prints a short summary.  Exit status: 0 on success, 1 for
usage or input errors, 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import energy as en
from .errors import InputFormatError, NumericalError
from .integrators import ForcingMode, LinearSkewProblem, Starter, Stepper, StepperConfig, integrate, steps_for
from .problems import BenchmarkId, build, load_problem
from .schemes import SchemeCoefficients, SchemeFamily, custom_scheme, make_scheme
from .stability import a_stable_closed_form, a_stable_sampled, stability_region

__all__ = [
    "ErrorTable",
    "LongTimeTable",
    "BlowupSummary",
    "accuracy_table",
    "longtime_table",
    "blowup_run",
    "write_csv",
    "read_csv",
    "main",
]

FAMILIES = {
    "bdf2": (SchemeFamily.GeneralizedBDF2, Stepper.LMM),
    "am2": (SchemeFamily.GeneralizedAM2, Stepper.LMM),
    "imex-bdf2": (SchemeFamily.GeneralizedBDF2, Stepper.IMEX_BDF2),
    "imex-amab2": (SchemeFamily.GeneralizedAM2, Stepper.IMEX_AMAB2),
}

LONGTIME_CHECKPOINTS = (1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    return "%.17g" % x


# ---------------------------------------------------------------- tables


def observed_order(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    """log(e_coarse/e_fine) / log(h_coarse/h_fine); NaN when either error is zero."""
    if not (e_coarse > 0 and e_fine > 0):
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


@dataclass
class ErrorTable:
    """Rows (h, relative error, observed order); order is None on the first row."""

    rows: List[Tuple[float, float, Optional[float]]] = field(default_factory=list)

    def __post_init__(self):
        hs = [r[0] for r in self.rows]
        if any(a <= b for a, b in zip(hs, hs[1:])):
            raise ValueError("step sizes must be strictly decreasing")

    @classmethod
    def from_errors(cls, hs: Sequence[float], errors: Sequence[float]) -> "ErrorTable":
        rows = []
        for k, (h, e) in enumerate(zip(hs, errors)):
            order = None if k == 0 else observed_order(errors[k - 1], e, hs[k - 1], h)
            rows.append((float(h), float(e), order))
        return cls(rows)

    def error_at(self, h: float) -> float:
        return next(e for hh, e, _ in self.rows if math.isclose(hh, h, rel_tol=1e-12))

    def order_at(self, h: float) -> Optional[float]:
        return next(o for hh, _, o in self.rows if math.isclose(hh, h, rel_tol=1e-12))

    def csv_rows(self):
        yield ("h", "relative_error", "observed_order")
        for h, e, o in self.rows:
            yield (fmt(h), fmt(e), "" if o is None else fmt(o))


@dataclass
class LongTimeTable:
    """Errors at checkpoint times for several step sizes, with pairwise orders."""

    step_sizes: List[float]
    rows: List[Tuple[float, Dict[float, float], Dict[Tuple[float, float], float]]] = field(default_factory=list)

    def __post_init__(self):
        ts = [r[0] for r in self.rows]
        if any(a >= b for a, b in zip(ts, ts[1:])):
            raise ValueError("evolution times must be increasing")

    def error(self, t: float, h: float) -> float:
        return next(errs[h] for tt, errs, _ in self.rows if math.isclose(tt, t))

    def order(self, t: float, h_coarse: float, h_fine: float) -> float:
        return next(o[(h_coarse, h_fine)] for tt, _, o in self.rows if math.isclose(tt, t))

    def csv_rows(self):
        pairs = list(zip(self.step_sizes, self.step_sizes[1:]))
        yield ("t", *[f"error_h={fmt(h)}" for h in self.step_sizes],
               *[f"order_h={fmt(a)}/{fmt(b)}" for a, b in pairs])
        for t, errs, orders in self.rows:
            yield (fmt(t), *[fmt(errs[h]) for h in self.step_sizes], *[fmt(orders[pr]) for pr in pairs])


def _scheme_and_stepper(family: str, alpha: float) -> Tuple[SchemeCoefficients, Stepper]:
    fam, stepper = FAMILIES[family]
    return make_scheme(fam, alpha), stepper


def _check_decreasing(hs: Sequence[float]) -> List[float]:
    hs = [float(h) for h in hs]
    if not hs or any(not h > 0 for h in hs):
        raise UsageError("step sizes must be positive")
    if any(a <= b for a, b in zip(hs, hs[1:])):
        raise UsageError("list step sizes from largest to smallest, without repeats")
    return hs


def accuracy_table(
    p: LinearSkewProblem,
    family: str,
    alpha: float,
    hs: Sequence[float],
    t_end: float = 1.0,
    starter: Starter = Starter.ExactInjection,
    forcing: ForcingMode = ForcingMode.COLLOCATED,
) -> ErrorTable:
    """Relative error |y_N - y(t_end)| / |y(t_end)| at the terminal time for each h."""
    if p.exact is None:
        raise UsageError(f"problem {p.name!r} has no exact solution")
    hs = _check_decreasing(hs)
    scheme, stepper = _scheme_and_stepper(family, alpha)
    exact = np.asarray(p.exact(t_end))
    errors = []
    for h in hs:
        traj = integrate(p, StepperConfig(scheme, h, starter), stepper, t_end, forcing=forcing)
        if traj.blew_up:
            errors.append(math.inf)
            continue
        errors.append(float(np.linalg.norm(traj.states[-1] - exact) / np.linalg.norm(exact)))
    return ErrorTable.from_errors(hs, errors)


def longtime_table(
    p: LinearSkewProblem,
    family: str,
    alpha: float,
    hs: Sequence[float],
    checkpoints: Sequence[float] = LONGTIME_CHECKPOINTS,
    starter: Starter = Starter.ExactInjection,
    error: str = "absolute",
    forcing: ForcingMode = ForcingMode.COLLOCATED,
) -> LongTimeTable:
    """Euclidean error at each checkpoint (absolute by default, or relative)."""
    if p.exact is None:
        raise UsageError(f"problem {p.name!r} has no exact solution")
    if error not in ("absolute", "relative"):
        raise UsageError("error must be 'absolute' or 'relative'")
    hs = _check_decreasing(hs)
    checkpoints = sorted(float(t) for t in checkpoints)
    if not checkpoints or checkpoints[0] <= 0:
        raise UsageError("checkpoints must be positive")
    scheme, stepper = _scheme_and_stepper(family, alpha)
    exact = {t: np.asarray(p.exact(t)) for t in checkpoints}
    t_end = checkpoints[-1]
    errs: Dict[float, Dict[float, float]] = {t: {} for t in checkpoints}
    for h in hs:
        try:
            idx = {t: steps_for(t, h) for t in checkpoints}
        except ValueError as exc:
            raise UsageError(f"checkpoint not reachable with h={h:g}: {exc}") from None
        traj = integrate(p, StepperConfig(scheme, h, starter), stepper, t_end, forcing=forcing)
        for t in checkpoints:
            n = idx[t]
            if n >= len(traj.states):
                errs[t][h] = math.inf
                continue
            e = float(np.linalg.norm(traj.states[n] - exact[t]))
            if error == "relative":
                e /= float(np.linalg.norm(exact[t]))
            errs[t][h] = e
    rows = []
    for t in checkpoints:
        orders = {(a, b): observed_order(errs[t][a], errs[t][b], a, b) for a, b in zip(hs, hs[1:])}
        rows.append((t, errs[t], orders))
    return LongTimeTable(hs, rows)


@dataclass
class BlowupSummary:
    alpha: float
    h: float
    t_end: float
    bounded: bool
    blew_up: bool
    growth_exponent: float
    final_norm: float

    header = ("alpha", "h", "t_end", "bounded", "blew_up", "growth_exponent", "final_norm")

    def csv_row(self):
        return (fmt(self.alpha), fmt(self.h), fmt(self.t_end), str(self.bounded).lower(),
                str(self.blew_up).lower(), fmt(self.growth_exponent), fmt(self.final_norm))


def growth_exponent(times: np.ndarray, norms: np.ndarray) -> float:
    """Least-squares slope of log|y| against t over the final third of the run."""
    k = len(times) - max(2, len(times) // 3)
    t, r = np.asarray(times[k:]), np.asarray(norms[k:])
    keep = (r > 0) & np.isfinite(r)
    if keep.sum() < 2:
        return 0.0 if not keep.any() or np.all(r[keep] == 0) else math.nan
    return float(np.polyfit(t[keep], np.log(r[keep]), 1)[0])


def blowup_run(p: LinearSkewProblem, family: str, alpha: float, h: float, t_end: float,
               starter: Starter = Starter.ExactInjection):
    """Integrate and classify one run; returns (trajectory, summary)."""
    scheme, stepper = _scheme_and_stepper(family, alpha)
    traj = integrate(p, StepperConfig(scheme, h, starter), stepper, t_end)
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(traj.states, axis=1)
    bounded = en._head_tail_bounded(norms**2) and not traj.blew_up
    summary = BlowupSummary(alpha, h, t_end, bounded, traj.blew_up,
                            growth_exponent(traj.times, norms), float(norms[-1]))
    return traj, summary


# ---------------------------------------------------------------- CSV io


def write_csv(path: str, rows) -> str:
    """Write rows atomically (temp file in the same directory, then rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv(path: str) -> Tuple[List[str], List[List[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"not a finite number list: {text!r}")
    return vals


def _flatten(groups) -> List[float]:
    return [v for g in groups for v in g]


def resolve_problem(spec: str) -> LinearSkewProblem:
    """A benchmark name (``damped-driven``, ``damped-driven-skew``, ``damped-driven-skew2``,
    ``dahlquist:<complex lambda>``) or the path of a problem file."""
    if spec.startswith("dahlquist:"):
        try:
            lam = complex(spec.split(":", 1)[1].replace(" ", ""))
        except ValueError:
            raise UsageError(f"bad lambda in {spec!r}") from None
        try:
            return build(BenchmarkId.ScalarDahlquist, lam=lam)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    names = {b.value for b in BenchmarkId} - {"custom", "dahlquist"}
    if spec in names:
        return build(spec)
    if os.path.isfile(spec):
        return load_problem(spec)
    raise UsageError(f"unknown problem {spec!r}: expected one of {sorted(names)} or a file path")


def _common(parser, *, family="bdf2", families=tuple(FAMILIES), problem="damped-driven", h=None, t_end=1.0):
    parser.add_argument("--family", choices=families, default=family)
    parser.add_argument("--alpha", type=_float_list, nargs="+", required=True,
                        help="one or more alpha values (space or comma separated)")
    parser.add_argument("--h", type=_float_list, nargs="+", default=[h] if h else None,
                        required=h is None, help="step sizes, largest first")
    parser.add_argument("--t-end", type=float, default=t_end)
    parser.add_argument("--problem", default=problem, help="benchmark name or problem file")
    parser.add_argument("--starter", choices=[s.value for s in Starter], default="exact")
    parser.add_argument("--out", default=".", help="output directory for CSV files")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="twostep", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("accuracy", help="terminal-time relative error and observed order")
    _common(p, h=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    p.add_argument("--forcing", choices=[m.value for m in ForcingMode], default="collocated",
                   help="forcing treatment of the monolithic scheme")

    p = sub.add_parser("longtime", help="errors at checkpoint times for several step sizes")
    _common(p, family="imex-bdf2", problem="damped-driven-skew", h=[2e-3, 1e-3, 5e-4], t_end=100.0)
    p.add_argument("--checkpoints", type=_float_list, nargs="+", default=None,
                   help="checkpoint times (default 1,10,20,...,100 up to --t-end)")
    p.add_argument("--error", choices=["absolute", "relative"], default="absolute")

    p = sub.add_parser("blowup", help="boundedness and growth rate of IMEX runs")
    _common(p, family="imex-bdf2", families=("imex-bdf2", "imex-amab2"), problem="damped-driven-skew",
            h=[10.0], t_end=1e4)

    p = sub.add_parser("energy", help="G-norm energy series of IMEX-BDF2 runs")
    _common(p, family="imex-bdf2", families=("imex-bdf2",), problem="damped-driven-skew", h=[0.1], t_end=100.0)
    p.add_argument("--y0-scale", type=float, default=1.0, help="multiply the initial data")

    p = sub.add_parser("stability", help="A-stability verdicts and stability-region rasters")
    p.add_argument("--family", choices=["bdf2", "am2"])
    p.add_argument("--alpha", type=_float_list, nargs="+")
    p.add_argument("--coeffs", help="file with lines 'a: a0 a1 a2' and 'b: b0 b1 b2'")
    p.add_argument("--samples", type=int, default=20001)
    p.add_argument("--window", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--resolution", type=int, nargs=2, default=[201, 201], metavar=("NX", "NY"))
    p.add_argument("--out", default=".")
    return ap


def read_coefficient_file(path: str) -> SchemeCoefficients:
    found = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, rest = line.partition(":")
            key = key.strip()
            if not sep or key not in ("a", "b") or key in found:
                raise InputFormatError(f"{path}:{lineno}: expected one 'a: a0 a1 a2' and one 'b: b0 b1 b2' line")
            try:
                vals = [float(v) for v in rest.split()]
            except ValueError:
                raise InputFormatError(f"{path}:{lineno}: non-numeric coefficient") from None
            if len(vals) != 3:
                raise InputFormatError(f"{path}:{lineno}: need exactly three coefficients")
            found[key] = vals
    if set(found) != {"a", "b"}:
        raise InputFormatError(f"{path}: both 'a' and 'b' lines are required")
    try:
        return custom_scheme(found["a"], found["b"])
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- commands


def _tag(family: str, alpha: float) -> str:
    return f"{family}_alpha={alpha:g}"


def cmd_accuracy(args) -> None:
    p = resolve_problem(args.problem)
    hs = _flatten(args.h)
    for alpha in _flatten(args.alpha):
        table = accuracy_table(p, args.family, alpha, hs, args.t_end, Starter(args.starter), ForcingMode(args.forcing))
        path = write_csv(os.path.join(args.out, f"accuracy_{_tag(args.family, alpha)}.csv"), table.csv_rows())
        print(f"{args.family} alpha={alpha:g} -> {path}")
        for h, e, o in table.rows:
            print(f"  h={h:<8g} error={e:.4e}" + ("" if o is None else f"  order={o:.4f}"))


def cmd_longtime(args) -> None:
    p = resolve_problem(args.problem)
    hs = _flatten(args.h)
    if args.checkpoints is None:
        cps = [t for t in LONGTIME_CHECKPOINTS if t <= args.t_end] or [args.t_end]
    else:
        cps = _flatten(args.checkpoints)
    for alpha in _flatten(args.alpha):
        table = longtime_table(p, args.family, alpha, hs, cps, Starter(args.starter), args.error)
        path = write_csv(os.path.join(args.out, f"longtime_{_tag(args.family, alpha)}.csv"), table.csv_rows())
        print(f"{args.family} alpha={alpha:g} -> {path}")
        for t, errs, orders in table.rows:
            cells = "  ".join(f"{errs[h]:.4e}" for h in hs)
            ords = "  ".join(f"{o:.4f}" for o in orders.values())
            print(f"  t={t:<6g} {cells}  | {ords}")


def cmd_blowup(args) -> None:
    p = resolve_problem(args.problem)
    summaries = []
    for h in _flatten(args.h):
        for alpha in _flatten(args.alpha):
            traj, s = blowup_run(p, args.family, alpha, h, args.t_end, Starter(args.starter))
            norms = np.linalg.norm(traj.states, axis=1)
            cols = ("t", *[f"y{k}" for k in range(p.dim)], "norm")
            rows = [cols] + [(fmt(t), *map(fmt, y), fmt(r)) for t, y, r in zip(traj.times, traj.states, norms)]
            write_csv(os.path.join(args.out, f"blowup_{_tag(args.family, alpha)}_h={h:g}.csv"), rows)
            summaries.append(s)
            print(f"{args.family} alpha={alpha:g} h={h:g}: bounded={s.bounded} blew_up={s.blew_up} "
                  f"growth_exponent={s.growth_exponent:.4g} final_norm={s.final_norm:.4g}")
    write_csv(os.path.join(args.out, f"blowup_{args.family}_summary.csv"),
              [BlowupSummary.header] + [s.csv_row() for s in summaries])


def cmd_energy(args) -> None:
    p = resolve_problem(args.problem)
    if args.y0_scale != 1.0:
        p = LinearSkewProblem(p.L, p.Ls, p.forcing, args.y0_scale * p.y0, name=p.name)
    c1 = en.skew_dominance_constant(p)
    for h in _flatten(args.h):
        for alpha in _flatten(args.alpha):
            scheme, stepper = _scheme_and_stepper(args.family, alpha)
            starter = Starter(args.starter) if p.exact is not None else Starter.TrapezoidOneStep
            traj = integrate(p, StepperConfig(scheme, h, starter), stepper, args.t_end)
            series = en.energy_series(traj, alpha, h, p.l0)
            rows = [("n", "t", "g_norm_sq", "e_n")]
            rows += [(str(r.n), fmt(traj.times[r.n]), fmt(r.g_norm_sq), fmt(r.e_n)) for r in series.records]
            path = write_csv(os.path.join(args.out, f"energy_{_tag(args.family, alpha)}_h={h:g}.csv"), rows)
            hmax = en.max_step_bdf2(alpha, p.l0, c1) if alpha >= 0.75 else math.nan
            print(f"{args.family} alpha={alpha:g} h={h:g}: bounded={series.bounded} "
                  f"h_max={hmax:.6g} max_E={series.e.max():.6g} -> {path}")


def cmd_stability(args) -> None:
    schemes: List[Tuple[SchemeCoefficients, Optional[bool]]] = []
    if args.coeffs:
        if args.family or args.alpha:
            raise UsageError("give either --coeffs or --family/--alpha, not both")
        schemes.append((read_coefficient_file(args.coeffs), None))
    else:
        if not (args.family and args.alpha):
            raise UsageError("need --family and --alpha, or --coeffs")
        for alpha in _flatten(args.alpha):
            s = make_scheme(args.family, alpha)
            schemes.append((s, a_stable_closed_form(args.family, alpha)))
    if args.samples < 3:
        raise UsageError("--samples must be at least 3")
    for s, closed in schemes:
        label = lambda ok: "A-stable" if ok else "not A-stable"  # noqa: E731
        print(f"{s}")
        if closed is not None:
            print(f"  closed form: {label(closed)}")
        v = a_stable_sampled(s, args.samples)
        line = f"  sampled (n={v.n_samples}): {label(v.stable)}, max root modulus {v.max_root_modulus:.6g}"
        if not v.stable:
            w = v.witness
            where = f"t={w.imag:.6g}" if w.real == 0 else f"z={w.real:.6g}{w.imag:+.6g}j"
            line += f", witness {where}"
        print(line)
        if args.window:
            nx, ny = args.resolution
            r = stability_region(s, tuple(args.window), (nx, ny))
            rows = [("re", "im", "max_root_modulus")]
            for i in range(nx):
                for j in range(ny):
                    z = r.z_at(i, j)
                    rows.append((fmt(z.real), fmt(z.imag), fmt(r.cells[i, j])))
            name = "custom" if s.alpha is None else _tag(s.family.value, s.alpha)
            path = write_csv(os.path.join(args.out, f"stability_{name}.csv"), rows)
            print(f"  raster {nx}x{ny}, stable area {r.stable_area():.6g} -> {path}")


COMMANDS = {
    "accuracy": cmd_accuracy,
    "longtime": cmd_longtime,
    "blowup": cmd_blowup,
    "energy": cmd_energy,
    "stability": cmd_stability,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"twostep: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, InputFormatError, ValueError) as exc:
        print(f"twostep: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

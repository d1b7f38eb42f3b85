import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twostep.energy import (
    GMatrix,
    bdf2_energy_identity_residual,
    contraction_factor,
    energy_series,
    forcing_budget,
    g_norm_sq,
    gnorm_equivalence_constants,
    max_step_bdf2,
    skew_dominance_constant,
)
from twostep.integrators import LinearSkewProblem, Starter, Stepper, StepperConfig, Trajectory, integrate
from twostep.problems import BenchmarkId, build
from twostep.schemes import make_scheme


def test_g_matrix_determinant():
    for a in np.linspace(-1, 3, 41):
        assert np.linalg.det(GMatrix(a).entries) == pytest.approx((4 * a - 3) / 16, abs=1e-14)
        assert GMatrix(a).det == pytest.approx((4 * a - 3) / 16, abs=1e-15)


def test_g_positive_definite_iff_alpha_above_three_quarters():
    for a in np.linspace(0, 2, 201):
        if abs(a - 0.75) < 1e-9:
            continue
        pd = np.linalg.eigvalsh(GMatrix(a).entries).min() > 0
        assert pd == (a > 0.75) == GMatrix(a).is_positive_definite


@pytest.mark.parametrize("prev, cur, alpha, expected", [
    (1.0, 0.0, 1.0, 0.25),
    (0.0, 1.0, 1.0, 1.25),
    (1.0, 1.0, 0.75, 0.5),
])
def test_g_norm_examples(prev, cur, alpha, expected):
    assert g_norm_sq(prev, cur, alpha) == pytest.approx(expected)


def test_g_norm_blockwise_matches_kronecker(rng):
    u, v = rng.normal(size=4), rng.normal(size=4)
    G = np.kron(GMatrix(1.1).entries, np.eye(4))
    V = np.concatenate([u, v])
    assert g_norm_sq(u, v, 1.1) == pytest.approx(V @ G @ V, rel=1e-13)


def test_g_norm_dimension_mismatch():
    with pytest.raises(ValueError):
        g_norm_sq([1.0, 2.0], [1.0], 1.0)


def test_identity_trivial_cases():
    assert bdf2_energy_identity_residual(0.0, 0.0, 0.0, 1.0) == 0.0
    assert bdf2_energy_identity_residual([3.0, -1.0], [3.0, -1.0], [3.0, -1.0], 1.3) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.3])
def test_identity_random_triples(alpha, rng):
    worst = 0.0
    for _ in range(10_000):
        y = rng.normal(size=(3, 3)) * rng.choice([1e-3, 1.0, 1e3])
        scale = sum(float(v @ v) for v in y) * (1 + abs(alpha))
        worst = max(worst, abs(bdf2_energy_identity_residual(y[0], y[1], y[2], alpha)) / scale)
    assert worst <= 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 2.0))
def test_identity_holds_for_any_alpha(a, b, c, alpha):
    scale = (a * a + b * b + c * c) * (1 + alpha)
    assert abs(bdf2_energy_identity_residual(a, b, c, alpha)) <= 1e-12 * max(scale, 1e-300) + 1e-300


def test_equivalence_constants():
    lo, hi = gnorm_equivalence_constants(1.0)
    assert (lo, hi) == pytest.approx((0.25 + (1 - math.sqrt(2)) / 2, 0.25 + (1 + math.sqrt(2)) / 2))
    assert (lo, hi) == pytest.approx(tuple(np.linalg.eigvalsh(GMatrix(1.0).entries)))
    for a in (0.8, 1.3, 4.0):
        lo, hi = gnorm_equivalence_constants(a)
        assert lo + hi == pytest.approx(a + 0.5)
        assert lo * hi == pytest.approx((4 * a - 3) / 16)


def test_equivalence_bounds_g_norm(rng):
    lo, hi = gnorm_equivalence_constants(1.2)
    for _ in range(1000):
        u, v = rng.normal(size=2)
        n2 = u * u + v * v
        assert lo * n2 - 1e-14 <= g_norm_sq(u, v, 1.2) <= hi * n2 + 1e-14


@pytest.mark.parametrize("alpha", [0.75, 0.5])
def test_equivalence_requires_positive_definite(alpha):
    with pytest.raises(ValueError):
        gnorm_equivalence_constants(alpha)


def test_max_step_examples():
    assert max_step_bdf2(1.0, 10, 10) == pytest.approx(5.0)
    assert max_step_bdf2(0.75, 10, 10) == 0.0
    # (4*1.1 - 3)/4 = 0.35 over 10*0.005 + 0.005 + 1.21/20 = 0.1155
    assert max_step_bdf2(1.1, 10, 10) == pytest.approx(0.35 / 0.1155)
    assert max_step_bdf2(1.0, 10, math.inf) == math.inf


@pytest.mark.parametrize("args", [(0.7, 10, 10), (1.0, 0, 10), (1.0, 10, -1)])
def test_max_step_invalid(args):
    with pytest.raises(ValueError):
        max_step_bdf2(*args)


def test_dominance_examples():
    assert skew_dominance_constant(build(BenchmarkId.DampedDrivenSkew)) == pytest.approx(10.0)
    assert skew_dominance_constant(build(BenchmarkId.DampedDrivenSkew2)) == pytest.approx(0.625)
    assert skew_dominance_constant(build(BenchmarkId.DampedDriven)) == math.inf


def test_dominance_is_sharp(rng):
    A = rng.normal(size=(4, 4))
    L = A @ A.T + np.eye(4)
    B = rng.normal(size=(4, 4))
    Ls = B - B.T  # singular in odd dimensions, full rank here
    p = LinearSkewProblem(L, Ls, lambda t: np.zeros(4), np.zeros(4))
    c1 = skew_dominance_constant(p)
    ratios = []
    for y in rng.normal(size=(20000, 4)):
        ratios.append((y @ L @ y) / np.sum((Ls @ y) ** 2))
    assert min(ratios) >= c1 * (1 - 1e-12)
    assert min(ratios) <= c1 * 1.05


def test_dominance_singular_skew():
    Ls = np.zeros((3, 3))
    Ls[0, 1], Ls[1, 0] = -2.0, 2.0
    p = LinearSkewProblem(np.diag([1.0, 4.0, 9.0]), Ls, lambda t: np.zeros(3), np.zeros(3))
    # <Ly,y>/|Ls y|^2 = (y0^2 + 4y1^2 + 9y2^2)/(4(y0^2 + y1^2)) >= 1/4
    assert skew_dominance_constant(p) == pytest.approx(0.25)


def test_energy_series_zero_trajectory():
    traj = Trajectory(np.arange(5.0), np.zeros((5, 2)))
    s = energy_series(traj, 1.0, 1.0, 10.0)
    assert [r.n for r in s.records] == [1, 2, 3, 4]
    assert all(r.e_n == 0 and r.g_norm_sq == 0 for r in s.records)
    assert s.bounded


def test_energy_series_definition():
    p = build(BenchmarkId.DampedDrivenSkew)
    traj = integrate(p, StepperConfig(make_scheme("bdf2", 1.1), 0.1), Stepper.IMEX_BDF2, 2.0)
    s = energy_series(traj, 1.1, 0.1, 10.0)
    n = 7
    y = traj.states
    expected_g = g_norm_sq(y[n - 1], y[n], 1.1)
    assert s.records[n - 1].g_norm_sq == pytest.approx(expected_g, rel=1e-13)
    assert s.records[n - 1].e_n == pytest.approx(expected_g + 0.1 * 10 / 32 * y[n] @ y[n], rel=1e-13)
    assert np.all(s.e >= s.g)


def test_energy_bounded_small_step():
    p = build(BenchmarkId.DampedDrivenSkew)
    traj = integrate(p, StepperConfig(make_scheme("bdf2", 1.1), 0.1), Stepper.IMEX_BDF2, 100.0)
    assert energy_series(traj, 1.1, 0.1, p.l0).bounded


def test_energy_unbounded_large_step():
    p = build(BenchmarkId.DampedDrivenSkew)
    traj = integrate(p, StepperConfig(make_scheme("bdf2", 0.75), 10.0), Stepper.IMEX_BDF2, 1e4)
    assert not energy_series(traj, 0.75, 10.0, p.l0).bounded


def test_contraction_factor():
    lo = gnorm_equivalence_constants(1.0)[0]
    assert contraction_factor(1.0, 0.5, 10) == pytest.approx(1 + 0.5 * 10 * lo / 32)
    assert contraction_factor(1.0, 1e6, 10) == 3.0
    assert forcing_budget(0.1, 10, 2.0) == pytest.approx(0.1 * 0.7 * 4)


@pytest.mark.parametrize("family, alpha", [("bdf2", 0.8), ("bdf2", 1.0), ("am2", 0.5), ("am2", 0.7)])
def test_decay_independent_of_initial_data(family, alpha):
    lam = -2.0 + 5.0j
    p = build(BenchmarkId.ScalarDahlquist, lam=lam)
    forcing = lambda t: np.array([math.sin(t), 0.3])  # noqa: E731
    a = LinearSkewProblem(p.L, p.Ls, forcing, [1.0, 0.0])
    b = LinearSkewProblem(p.L, p.Ls, forcing, [1e6, -1e6])
    h = 0.05
    t_end = 200 / abs(lam.real)
    cfg = StepperConfig(make_scheme(family, alpha), h, Starter.TrapezoidOneStep)
    ya = integrate(a, cfg, Stepper.LMM, t_end).states
    yb = integrate(b, cfg, Stepper.LMM, t_end).states
    diff = np.linalg.norm(ya - yb, axis=1)
    assert diff[0] > 1e5
    assert diff[-1] < 1e-8

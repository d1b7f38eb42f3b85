import math
import subprocess
import sys

import numpy as np
import pytest

from twostep.cli import (
    ErrorTable,
    LongTimeTable,
    accuracy_table,
    growth_exponent,
    longtime_table,
    main,
    read_csv,
    write_csv,
)
from twostep.problems import BenchmarkId, build


# ------------------------------------------------------------- tables


def test_error_table_orders():
    t = ErrorTable.from_errors([0.1, 0.01], [1e-2, 1e-4])
    assert t.rows[0][2] is None
    assert t.rows[1][2] == pytest.approx(2.0)


def test_error_table_requires_decreasing_h():
    with pytest.raises(ValueError):
        ErrorTable([(0.01, 1.0, None), (0.1, 1.0, 0.0)])


@pytest.mark.parametrize("family, alpha, h, err, order", [
    ("bdf2", 1.0, 1e-3, 7.3022e-08, 2.0382),
    ("bdf2", 0.8, 1e-4, 2.8301e-09, 2.0007),
    ("am2", 0.5, 1e-3, 1.4079e-07, 2.0012),
])
def test_accuracy_examples(family, alpha, h, err, order):
    p = build(BenchmarkId.DampedDriven)
    hs = [10 * h, h]
    t = accuracy_table(p, family, alpha, hs)
    assert t.error_at(h) == pytest.approx(err, rel=0.05)
    assert t.order_at(h) == pytest.approx(order, abs=0.05)


def test_longtime_examples():
    p = build(BenchmarkId.DampedDrivenSkew)
    t = longtime_table(p, "imex-bdf2", 1.1, [2e-3, 1e-3], [100.0])
    assert t.error(100.0, 1e-3) == pytest.approx(3.6043e-08, rel=0.1)
    assert t.order(100.0, 2e-3, 1e-3) == pytest.approx(1.9994, abs=0.05)
    t = longtime_table(p, "imex-amab2", 0.6, [1e-3, 5e-4], [40.0])
    assert t.error(40.0, 5e-4) == pytest.approx(1.5553e-08, rel=0.1)
    assert t.order(40.0, 1e-3, 5e-4) == pytest.approx(2.0000, abs=0.05)


def test_longtime_zero_problem(tmp_path):
    path = tmp_path / "zero.txt"
    path.write_text("dim 2\nL\n10 0\n0 10\nLs\n0 -1\n1 0\ny0 0 0\n")
    from twostep.problems import load_problem
    t = longtime_table(load_problem(path), "imex-bdf2", 1.1, [0.1, 0.05], [1.0, 5.0])
    assert all(e == 0.0 for _, errs, _ in t.rows for e in errs.values())
    assert all(math.isnan(o) for _, _, orders in t.rows for o in orders.values())


def test_longtime_checkpoint_must_be_reachable():
    from twostep.cli import UsageError
    with pytest.raises(UsageError):
        longtime_table(build(BenchmarkId.DampedDrivenSkew), "imex-bdf2", 1.1, [0.3], [1.0])


def test_longtime_table_requires_increasing_times():
    with pytest.raises(ValueError):
        LongTimeTable([0.1], [(2.0, {0.1: 1.0}, {}), (1.0, {0.1: 1.0}, {})])


def test_growth_exponent_recovers_rate():
    t = np.linspace(0, 30, 301)
    assert growth_exponent(t, 3 * np.exp(0.4 * t)) == pytest.approx(0.4)
    assert growth_exponent(t, np.zeros_like(t)) == 0.0


# ------------------------------------------------------------- CSV


def test_csv_round_trip(tmp_path):
    vals = [0.1, 1 / 3, 2.0 ** -1074, 1e300, -7.3022e-08, math.pi]
    from twostep.cli import fmt
    path = write_csv(str(tmp_path / "x.csv"), [("v",)] + [(fmt(v),) for v in vals])
    header, rows = read_csv(path)
    assert header == ["v"]
    assert [float(r[0]) for r in rows] == vals
    assert b"\r" not in open(path, "rb").read()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp")]


def test_accuracy_command_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["accuracy", "--family", "am2", "--alpha", "0.3,0.5", "--h", "0.1", "0.01", "0.001"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for name in ("accuracy_am2_alpha=0.3.csv", "accuracy_am2_alpha=0.5.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header, rows = read_csv(str(a / "accuracy_am2_alpha=0.5.csv"))
    assert header == ["h", "relative_error", "observed_order"]
    assert float(rows[2][1]) == pytest.approx(1.4079e-07, rel=0.05)
    assert rows[0][2] == ""


def test_longtime_command(tmp_path, capsys):
    assert main(["longtime", "--alpha", "0.6", "--family", "imex-amab2", "--h", "0.01", "0.005",
                 "--t-end", "20", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(str(tmp_path / "longtime_imex-amab2_alpha=0.6.csv"))
    assert header[0] == "t" and [r[0] for r in rows] == ["1", "10", "20"]
    assert len(header) == 1 + 2 + 1


def test_blowup_command(tmp_path, capsys):
    assert main(["blowup", "--alpha", "1.1", "--h", "0.1", "--t-end", "100", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(str(tmp_path / "blowup_imex-bdf2_summary.csv"))
    assert rows[0][header.index("bounded")] == "true"
    header, rows = read_csv(str(tmp_path / "blowup_imex-bdf2_alpha=1.1_h=0.1.csv"))
    assert header == ["t", "y0", "y1", "norm"] and len(rows) == 1001


def test_energy_command(tmp_path, capsys):
    assert main(["energy", "--alpha", "1.0", "--h", "0.5", "--t-end", "50", "--out", str(tmp_path)]) == 0
    assert "bounded=True" in capsys.readouterr().out
    header, rows = read_csv(str(tmp_path / "energy_imex-bdf2_alpha=1_h=0.5.csv"))
    assert header == ["n", "t", "g_norm_sq", "e_n"] and len(rows) == 100


# ------------------------------------------------------------- stability command


def test_stability_not_a_stable(capsys):
    assert main(["stability", "--family", "bdf2", "--alpha", "0.7"]) == 0
    out = capsys.readouterr().out
    assert "closed form: not A-stable" in out
    assert "sampled (n=20001): not A-stable" in out and "witness t=" in out


def test_stability_a_stable(capsys):
    assert main(["stability", "--family", "am2", "--alpha", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "closed form: A-stable" in out and "sampled (n=20001): A-stable" in out


def test_stability_raster(tmp_path):
    assert main(["stability", "--family", "bdf2", "--alpha", "1", "--window", "-1", "1", "-1", "1",
                 "--resolution", "3", "3", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(str(tmp_path / "stability_bdf2_alpha=1.csv"))
    assert header == ["re", "im", "max_root_modulus"]
    cell = {(float(r[0]), float(r[1])): float(r[2]) for r in rows}
    assert cell[(0.0, 0.0)] == 1.0
    assert cell[(-1.0, 0.0)] == pytest.approx(math.sqrt(5) / 5)


def test_stability_custom_coefficients(tmp_path, capsys):
    path = tmp_path / "euler.txt"
    path.write_text("# implicit Euler\na: 0 -1 1\nb: 0 0 1\n")
    assert main(["stability", "--coeffs", str(path)]) == 0
    out = capsys.readouterr().out
    assert "closed form" not in out and "A-stable" in out


@pytest.mark.parametrize("text", ["a: 0 -1 1\n", "a: 0 -1\nb: 0 0 1\n", "a: 0 -1 x\nb: 0 0 1\n", "c: 1 2 3\n",
                                  "a: 0 0 0\nb: 0 0 1\n"])
def test_stability_malformed_coefficients(tmp_path, text, capsys):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    assert main(["stability", "--coeffs", str(path)]) == 1


# ------------------------------------------------------------- exit codes


@pytest.mark.parametrize("argv", [
    [],
    ["accuracy"],
    ["accuracy", "--alpha", "abc"],
    ["accuracy", "--alpha", "1", "--family", "rk4"],
    ["accuracy", "--alpha", "1", "--problem", "no-such-problem"],
    ["accuracy", "--alpha", "1", "--h", "0.01", "0.1"],
    ["longtime", "--alpha", "1.1", "--h", "0.3", "--t-end", "1"],
    ["stability"],
    ["stability", "--family", "bdf2", "--alpha", "1", "--samples", "2"],
])
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    if argv and argv[0] != "stability":
        argv = argv + ["--out", str(tmp_path)]
    assert main(argv) == 1


def test_numerical_failure_exits_two(tmp_path, capsys):
    # negative alpha makes 3/2 I + h*alpha*L indefinite
    assert main(["blowup", "--alpha", "-10", "--h", "1", "--t-end", "2", "--out", str(tmp_path)]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "twostep", "stability", "--family", "am2", "--alpha", "0.49"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "not A-stable" in proc.stdout

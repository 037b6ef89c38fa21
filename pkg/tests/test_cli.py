import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from conftest import cached_closure
from sbpexist import coeffio
from sbpexist.cli import main
from sbpexist.construct import Representation, verify
from sbpexist.existence import SbpParameters


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exist_reports(capsys):
    code, out, _ = run(capsys, "exist", 5, 5, 11)
    assert code == 0
    assert out.splitlines()[0] == "exists dof_P=1 eta=2.077e-01"
    assert "eta_exact=1160435/5588352" in out
    code, out, _ = run(capsys, "exist", 5, 5, 10)
    assert code == 1 and out.startswith("not exists")


@pytest.mark.parametrize("argv", [("exist", 0, 1, 1), ("exist", 4, 4, 2), ("exist", "x", 1, 1),
                                  ("bogus",), ()])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_search_rows(capsys):
    code, out, _ = run(capsys, "search", "min-r", 4, 4)
    assert code == 0 and out.startswith("s=4 t=4 r=8 dof_P=0")
    code, out, _ = run(capsys, "search", "min-r", 2, 2)
    assert "r=4" in out and "eta=3.542e-01 (17/48)" in out
    code, out, _ = run(capsys, "search", "max-t", 6)
    assert out.startswith("s=6 t=5 r=12 dof_P=2 eta=2.997e-01")


def test_search_cap_exceeded(capsys):
    code, _, err = run(capsys, "search", "min-r", 5, 5, "--cap", 9)
    assert code == 1 and "r <= 9" in err


def test_build_first_order_files(capsys, tmp_path):
    code, _, _ = run(capsys, "build", 1, 1, 1, "--out-prefix", tmp_path)
    assert code == 0
    assert (tmp_path / "P_1_1_1.txt").read_text() == "0 0.5\n"
    assert (tmp_path / "D_1_1_1.txt").read_text() == "0 0 -1\n0 1 1\n"


def test_build_nonexistent(capsys, tmp_path):
    code, _, _ = run(capsys, "build", 5, 5, 10, "--out-prefix", tmp_path)
    assert code == 1
    assert not list(tmp_path.iterdir())


def test_build_optimized_names_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(capsys, "build", 6, 6, 15, "--optimize", "--out-prefix", d)[0] == 0
    for name in ("P_6_6_15.txt", "D_6_6_15.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    lines = (a / "D_6_6_15.txt").read_text().splitlines()
    keys = [tuple(map(int, ln.split()[:2])) for ln in lines]
    assert keys == sorted(keys)
    assert all(0 <= i < 15 and 0 <= j < 21 for i, j in keys)


def test_exact_round_trip(tmp_path):
    m = cached_closure(5, 5, 11)
    xi = [Fraction(3, 7)] + [Fraction(-1, k) for k in range(2, 11)]
    corner = m.closure_rows(xi)
    files = coeffio.write_files(m.params, m.norm.weights, corner, tmp_path, exact=True)
    params, weights, back = coeffio.read_files(files.p_file, files.d_file)
    assert params == m.params
    assert weights == list(m.norm.weights)
    assert back == corner
    op = coeffio.load_operator(files.p_file, files.d_file, n=60)
    rep = verify(op)
    assert rep.passed() and rep.max_residual == 0


def test_decimal_round_trip(tmp_path):
    from sbpexist.pde import optimized_operator

    spec = optimized_operator(SbpParameters(7, 7, 19))
    corner = spec.closure.closure_rows(spec.xi)
    files = coeffio.write_files(spec.params, spec.closure.norm.weights, corner, tmp_path)
    _, weights, back = coeffio.read_files(files.p_file, files.d_file)
    exact = np.array([[float(v) for v in row] for row in corner])
    got = np.array([[float(v) for v in row] for row in back])
    nz = exact != 0
    assert np.max(np.abs(got[nz] - exact[nz]) / np.abs(exact[nz])) <= 1e-15
    op = coeffio.load_operator(files.p_file, files.d_file, n=100, mode=Representation.FLOAT)
    assert verify(op).passed(1e-12)


def test_reader_rejects_bad_files(tmp_path):
    p, d = tmp_path / "P_1_1_1.txt", tmp_path / "D_1_1_1.txt"
    p.write_text("0 1/2\n")
    d.write_text("0 0 -1\n0 5 1\n")
    with pytest.raises(ValueError):
        coeffio.read_files(p, d)
    d.write_text("0 0\n")
    with pytest.raises(ValueError):
        coeffio.read_files(p, d)
    with pytest.raises(ValueError):
        coeffio.params_from_name(tmp_path / "weights.txt")


def test_verify_and_spectrum_from_files(capsys, tmp_path):
    run(capsys, "build", 3, 3, 6, "--optimize", "--exact", "--out-prefix", tmp_path)
    pf, df = tmp_path / "P_3_3_6.txt", tmp_path / "D_3_3_6.txt"
    code, out, _ = run(capsys, "verify", "--p-file", pf, "--d-file", df)
    assert code == 0 and out.rstrip().endswith("PASS")
    code, out, _ = run(capsys, "spectrum", "--p-file", pf, "--d-file", df, "--n-list", "100,200")
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "n,inv_h,rho,rho_h" and len(rows) == 3
    rho_h = [float(r.split(",")[3]) for r in rows[1:]]
    assert abs(rho_h[0] - rho_h[1]) < 0.02 * rho_h[0]


def test_verify_needs_operator(capsys):
    assert run(capsys, "verify")[0] == 2
    assert run(capsys, "verify", "--p-file", "P_1_1_1.txt")[0] == 2


def test_converge_and_advect(capsys):
    code, out, _ = run(capsys, "converge", "--s", 3, "--N", "100,200,400")
    assert code == 0
    order = float(out.strip().splitlines()[-1].split("=")[1])
    assert order == pytest.approx(3.0, abs=0.6)
    code, out, _ = run(capsys, "converge", "--s", 7, "--N", "100,200,400,800", "--digits", 40)
    order = float(out.strip().splitlines()[-1].split("=")[1])
    assert code == 0 and order == pytest.approx(7.0, abs=0.5)
    code, out, _ = run(capsys, "advect", "--s", 2, "--q", 3, "--N", 2000)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "s,q,N,final_error,cpu_seconds"
    assert float(lines[1].split(",")[3]) < 1.0


def test_sweep_to_file(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--s", 2, "--q", 3, "--N", "2000", "--out", out)
    assert code == 0
    assert out.read_text().splitlines()[0] == "s,q,N,final_error,cpu_seconds"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sbpexist", "exist", "1", "1", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("exists dof_P=0 eta=5.000e-01")

import math
import random
from fractions import Fraction

import numpy as np
import pytest
import sympy

from conftest import cached_closure
from sbpexist import pde
from sbpexist.construct import Representation, UnsupportedGrid, assemble
from sbpexist.existence import SbpParameters
from sbpexist.stencil import UnsupportedParameters

F = Fraction


def ab_oracle(q: int) -> list[Fraction]:
    """Solve the AB order conditions sum_j b_j (-j)^m = 1/(m+1) with sympy."""
    V = sympy.Matrix(q, q, lambda m, j: sympy.Integer(-j) ** m)
    rhs = sympy.Matrix([sympy.Rational(1, m + 1) for m in range(q)])
    return [F(int(v.p), int(v.q)) for v in V.LUsolve(rhs)]


@pytest.mark.parametrize(
    "s, q, expected", [(5, 6, (1.9, 8.93)), (2, 3, (1.4, 1.39)), (7, 8, (2.1, 34.1))]
)
def test_cfl_table(s, q, expected):
    assert pde.cfl_lookup(s, q) == expected


@pytest.mark.parametrize("s, q", [(1, 3), (8, 4), (4, 5), (4, 2)])
def test_cfl_outside_table(s, q):
    with pytest.raises(UnsupportedParameters):
        pde.cfl_lookup(s, q)


def test_known_ab_coefficients():
    assert pde.ab_coefficients(1).beta == (1,)
    assert pde.ab_coefficients(3).beta == (F(23, 12), F(-16, 12), F(5, 12))
    assert pde.ab_coefficients(4).beta == (F(55, 24), F(-59, 24), F(37, 24), F(-9, 24))


@pytest.mark.parametrize("q", range(1, 9))
def test_ab_order_conditions(q):
    beta = pde.ab_coefficients(q).beta
    assert sum(beta) == 1
    for m in range(q):
        assert sum(b * F(-j) ** m for j, b in enumerate(beta)) == F(1, m + 1)
    assert list(beta) == ab_oracle(q)


def test_ab_rejects_order_zero():
    with pytest.raises(ValueError):
        pde.ab_coefficients(0)


def test_step_size_product():
    for s in pde.CFL1:
        for q in pde.CFL2:
            h = 1000 / 3999
            k = pde.step_size(s, q, h)
            assert k * pde.CFL1[s] * pde.CFL2[q] == pytest.approx(h, rel=1e-15)


def test_boundary_pulse():
    assert pde.boundary_data(pde.PULSE_CENTER) == 1.0
    # essentially supported on an interval of width 20
    assert pde.boundary_data(pde.PULSE_CENTER + 10) == pytest.approx(1e-16, rel=1e-12)
    x = np.array([0.0, 990.0])
    assert pde.exact_solution(x, 1000.0)[1] == 1.0


def test_fit_order_on_power_law():
    N = [10, 20, 40, 80]
    assert pde.fit_order(N, [3.0 * n**-4.5 for n in N]) == pytest.approx(4.5)


def test_convergence_study_fourth_order():
    spec = pde.OperatorSpec(cached_closure(2, 2, 4))
    study = pde.derivative_convergence(spec, [50, 100, 200, 400])
    assert all(a > b for a, b in zip(study.errors, study.errors[1:]))
    # boundary order 2 closure with 4th order interior converges at rate 2
    assert study.fitted_order == pytest.approx(2.0, abs=0.3)
    assert pde.fit_order(study.N, study.interior_errors) >= 3.5


def test_convergence_fifth_order_float():
    spec = pde.optimized_operator(SbpParameters(5, 5, 11))
    study = pde.derivative_convergence(spec, [60, 85, 120, 170, 240])
    assert 4.5 <= study.fitted_order <= 5.8


@pytest.mark.parametrize("s, lo, hi", [(5, 4.5, 5.8), (7, 6.5, 7.8)])
def test_convergence_extended_precision(s, lo, hi):
    spec = pde.optimized_operator(pde.experiment_params(s))
    N = [60, 120, 240, 480, 600]
    study = pde.derivative_convergence(spec, N, digits=40)
    assert lo <= study.fitted_order <= hi
    assert all(a > b for a, b in zip(study.errors, study.errors[1:]))


def test_interior_rows_reach_interior_order():
    spec = pde.optimized_operator(SbpParameters(5, 5, 11))
    study = pde.derivative_convergence(spec, [60, 120, 240], digits=60)
    assert pde.fit_order(study.N, study.interior_errors) >= 2 * 5 - 0.5


def test_float_and_decimal_studies_agree_above_rounding():
    spec = pde.optimized_operator(SbpParameters(3, 3, 6))
    N = [40, 80]
    a = pde.derivative_convergence(spec, N)
    b = pde.derivative_convergence(spec, N, digits=30)
    assert np.allclose(a.errors, b.errors, rtol=1e-4)


def test_convergence_rejects_small_grid():
    spec = pde.OperatorSpec(cached_closure(2, 2, 4))
    with pytest.raises(UnsupportedGrid):
        pde.derivative_convergence(spec, [11])


@pytest.mark.parametrize("s", [1, 3, 5])
def test_semidiscrete_energy_rate_exact(s):
    # d/dt v^T P v = 2 v^T P (-D v - (v_0 - 0) P^-1 e0) = -(v_0^2 + v_n^2)
    m = cached_closure(s, s, {1: 1, 3: 6, 5: 11}[s])
    rng = random.Random(s)
    xi = [F(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(m.dof_D)]
    op = assemble(m, xi, n=4 * m.params.r)
    v = [F(rng.randint(-50, 50), rng.randint(1, 20)) for _ in range(op.n)]
    Dv = op.apply(v)
    rhs = [-a for a in Dv]
    rhs[0] -= v[0] / op.P[0]
    rate = 2 * sum(p * a * b for p, a, b in zip(op.P, v, rhs))
    assert rate == -(v[0] ** 2 + v[-1] ** 2)


def test_forward_euler_energy_balance():
    spec = pde.optimized_operator(SbpParameters(4, 4, 8))
    op = assemble(spec.closure, spec.xi, n=60, mode=Representation.FLOAT)
    k = op.h / 100
    rng = np.random.default_rng(0)
    v = rng.normal(size=op.n)
    E = v @ (op.P * v)
    for _ in range(200):
        f = pde.sat_rhs(op, v, 0.0, lambda t: 0.0)
        dissipative = 2 * k * (v @ (op.P * f))
        assert dissipative <= 1e-12
        growth = k * k * (f @ (op.P * f))
        v = v + k * f
        E_next = v @ (op.P * v)
        assert E_next == pytest.approx(E + dissipative + growth, rel=1e-12, abs=1e-12)
        E = E_next


def _python_march(op, q, k, t0, steps, x):
    """Plain AB march with the general SAT right-hand side (no kernel)."""
    beta = [float(b) for b in pde.ab_coefficients(q).beta]
    hist = [pde.sat_rhs(op, pde.exact_solution(x, t0 + m * k), t0 + m * k, pde.boundary_data)
            for m in range(q)]
    v = pde.exact_solution(x, t0 + (q - 1) * k)
    for m in range(q - 1, q - 1 + steps):
        v = v + k * sum(b * hist[-1 - j] for j, b in enumerate(beta))
        t = t0 + (m + 1) * k
        hist = hist[1:] + [pde.sat_rhs(op, v, t, pde.boundary_data)]
    return v, t0 + (q - 1 + steps) * k


@pytest.mark.parametrize("q", [3, 6, 8])
def test_kernel_matches_reference_march(q):
    s = 3
    spec = pde.optimized_operator(SbpParameters(3, 3, 6))
    N = 401
    h = pde.LENGTH / (N - 1)
    k = pde.step_size(s, q, h)
    steps = 300
    t_end = (q - 1 + steps) * k
    run = pde.solve_advection(pde.AdvectionRun(s, q, N), spec, final_time=t_end,
                              keep_solution=True)
    assert run.final_time == pytest.approx(t_end)
    op = assemble(spec.closure, spec.xi, n=N, h=h, mode=Representation.FLOAT)
    x = np.linspace(0.0, pde.LENGTH, N)
    ref, _ = _python_march(op, q, k, 0.0, steps, x)
    assert np.max(np.abs(run.solution - ref)) <= 1e-12


@pytest.mark.parametrize("q", [3, 4])
def test_temporal_order(q):
    # fine grid and the widest operator so that spatial error is negligible;
    # steps divide the interval exactly so every run ends at t0 + 10
    s, N, t0 = 7, 10001, 500.0
    spec = pde.optimized_operator(pde.experiment_params(s))
    h = pde.LENGTH / (N - 1)
    m0 = math.ceil(10 / pde.step_size(s, q, h))
    errors, ks = [], []
    for f in (1, 2, 4):
        k = 10 / (m0 * f)
        run = pde.solve_advection(pde.AdvectionRun(s, q, N), spec, final_time=t0 + 10,
                                  start_time=t0, k=k)
        assert run.final_time == pytest.approx(t0 + 10)
        errors.append(run.final_error)
        ks.append(k)
    slope = np.polyfit(np.log(ks), np.log(errors), 1)[0]
    assert abs(slope - q) <= 0.7


def test_hump_position_and_step():
    run = pde.solve_advection(pde.AdvectionRun(4, 4, 2000), keep_solution=True)
    assert run.k * 1.8 * 2.38 == pytest.approx(run.h, rel=1e-15)
    x = np.linspace(0.0, pde.LENGTH, run.N)
    assert abs(x[np.argmax(run.solution)] - 990.0) <= run.h
    assert run.final_time >= pde.FINAL_TIME
    assert run.final_error < 0.2


def test_instability_detected():
    spec = pde.optimized_operator(SbpParameters(2, 2, 4))
    with pytest.raises(pde.Diverged):
        pde.solve_advection(pde.AdvectionRun(2, 3, 400), spec, final_time=200.0,
                            k=5 * pde.LENGTH / 399)


def test_advection_rejects_small_grid():
    with pytest.raises(UnsupportedGrid):
        pde.solve_advection(pde.AdvectionRun(2, 3, 10))


def test_tiny_sweep_and_csv_roundtrip():
    seen = []
    runs = pde.benchmark_sweep([2], [3, 4], [2000, 4000], on_result=seen.append)
    assert len(runs) == len(seen) == 4
    assert not any(r.diverged for r in runs)
    text = pde.write_csv(runs)
    assert text.splitlines()[0] == "s,q,N,final_error,cpu_seconds"
    back = pde.read_csv(text)
    assert [(r.s, r.q, r.N, r.final_error) for r in back] == [
        (r.s, r.q, r.N, r.final_error) for r in runs
    ]
    # errors fall with resolution for each (s, q)
    assert runs[1].final_error < runs[0].final_error
    assert runs[3].final_error < runs[2].final_error


def test_best_method():
    runs = [
        pde.AdvectionRun(4, 4, 2000, final_error=1e-3, cpu_time=1.0),
        pde.AdvectionRun(7, 6, 2000, final_error=1e-6, cpu_time=3.0),
        pde.AdvectionRun(5, 6, 2000, final_error=1e-5, cpu_time=2.0),
        pde.AdvectionRun(2, 3, 2000, final_error=math.nan, diverged=True),
    ]
    assert pde.best_method(runs, 1e-2) == (4, 4)
    assert pde.best_method(runs, 1e-5) == (5, 6)
    assert pde.best_method(runs, 1e-6) == (7, 6)
    assert pde.best_method(runs, 1e-9) is None

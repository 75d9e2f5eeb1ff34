import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exterior_decay import maps
from exterior_decay.problem_model import GammaSpec, ProblemSpec
from exterior_decay.quadrature import GridSeries, build_grid
from exterior_decay.solver import (
    apply_T,
    assemble_solution,
    compactness_diagnostics,
    decay_law,
    picard_solve,
)

from conftest import KAPPA_1, KAPPA_2, canonical, trivial

GRID = build_grid(1.0, 1e6, 1024)


def kappa_recurrence(c=0.125, steps=200):
    """Scalar oracle: kappa <- kappa^2 + c from 0."""
    k = 0.0
    for _ in range(steps):
        k = k * k + c
    return k


def test_scalar_oracles():
    assert kappa_recurrence() == pytest.approx(KAPPA_1, rel=1e-14)
    assert kappa_recurrence(3 / 32) == pytest.approx(KAPPA_2, rel=1e-14)
    assert KAPPA_1**2 - KAPPA_1 + 1 / 8 == pytest.approx(0, abs=1e-16)


def test_apply_T_zero():
    T = apply_T(trivial(), GridSeries(GRID, np.zeros(GRID.N)))
    assert np.all(T.values == 0.0)


def test_apply_T_canonical_power():
    t = GRID.nodes
    kappa = 0.1
    T = apply_T(canonical(), GridSeries(GRID, kappa / t))
    assert np.max(np.abs(T.values * t - (kappa**2 + 0.125))) < 1e-10


def test_apply_T_beta_without_forcing():
    P = canonical(c=0.0, q_plus=0.3)
    t = GRID.nodes
    T = apply_T(P, GridSeries(GRID, 0.3 / t))
    assert np.max(np.abs(T.values * t - 0.09)) < 1e-10


def test_apply_T_warns_outside_band(caplog):
    with caplog.at_level("WARNING"):
        apply_T(canonical(), GridSeries(GRID, 0.9 / GRID.nodes))
    assert "leaves the band" in caplog.text


def test_picard_canonical1():
    res = picard_solve(canonical(), GRID)
    assert res.converged and res.iterations <= 40
    assert np.max(np.abs(res.b0.values * GRID.nodes - KAPPA_1)) < 1e-8
    assert res.residual <= 1e-10


def test_picard_canonical2():
    res = picard_solve(canonical(g=1 / 16), GRID)
    assert res.converged
    assert np.max(np.abs(res.b0.values * GRID.nodes - KAPPA_2)) < 1e-8


def test_picard_trivial_one_step():
    res = picard_solve(trivial(), GRID)
    assert res.converged and res.iterations == 1
    assert np.all(res.b0.values == 0.0)


def test_picard_iterates_follow_scalar_recurrence():
    res = picard_solve(canonical(), GRID, max_iter=5, tol=0.0)
    k = 0.0
    for state in res.history:
        k = k * k + 0.125
        assert np.max(np.abs(state.b * GRID.nodes - k)) < 1e-9


def test_nonconvergence_reported():
    res = picard_solve(canonical(), GRID, max_iter=3)
    assert not res.converged
    assert "inconclusive" in res.message
    assert res.status in ("diverged", "oscillating")


def test_damping_invariance():
    a = picard_solve(canonical(), GRID, damping=1.0)
    b = picard_solve(canonical(), GRID, damping=0.5)
    assert np.max(np.abs(a.b0.values - b.b0.values) * GRID.nodes) < 1e-8


def test_damping_validated():
    with pytest.raises(ValueError):
        picard_solve(canonical(), GRID, damping=0.0)


def test_projection_keeps_band():
    P = canonical()
    res = picard_solve(P, GRID, initial=0.4 / GRID.nodes, max_iter=50)
    beta = 0.5 / GRID.nodes
    assert np.all(res.b0.values <= beta) and np.all(res.b0.values >= 0)


def test_inB_recorded_before_projection():
    res = picard_solve(canonical(), GRID, initial=0.5 / GRID.nodes, max_iter=1, tol=0.0)
    # T(beta) = 3/(8t) lies inside the band by 1/(8t)
    assert res.history[0].inB == pytest.approx(0.125 / GRID.t_max, rel=1e-6)


def test_assemble_canonical1():
    sol = assemble_solution(canonical(), picard_solve(canonical(), GRID))
    u16 = np.interp(16.0, GRID.nodes, sol.u.values)
    assert u16 == pytest.approx(16**KAPPA_1, rel=1e-5)
    assert 16**KAPPA_1 == pytest.approx(1.500857, abs=1e-6)
    assert np.max(np.abs(sol.u.values / GRID.nodes**KAPPA_1 - 1)) < 1e-8
    assert np.min(sol.bracket_lower) >= 0 and np.min(sol.bracket_upper) >= 0
    assert sol.decay_bound_ok and sol.decay_ratio < 1
    assert sol.lam == 0.5 and sol.t_lam == 1.0
    assert sol.window_margin >= -1e-9


def test_assemble_trivial():
    sol = assemble_solution(trivial(), picard_solve(trivial(), GRID))
    assert np.all(sol.u.values == 1.0)
    assert np.all(sol.residual.values == 0.0)


def test_ode_residual_second_order():
    errs = []
    for N in (1024, 2048, 4096):
        g = build_grid(1.0, 1e6, N)
        errs.append(assemble_solution(canonical(), picard_solve(canonical(), g)).residual_rel_max)
    assert math.log2(errs[0] / errs[1]) >= 1.8
    assert math.log2(errs[1] / errs[2]) >= 1.8


def test_decay_law_variable_q():
    P = ProblemSpec(3, 3.0, 1.0, 1.0, 1.0, maps.RadialUMap([]), q_plus=maps.LogPower(1.0, 0.0, -1.0), gamma=GammaSpec("zero"))
    g = build_grid(P.t0, 1e6 * P.t0, 512)
    lam, t_lam = decay_law(P, g)
    assert lam == pytest.approx(1 / math.log(g.nodes[g.decade_start()]), rel=1e-14)
    assert np.all(P.q_plus(g.nodes[g.nodes >= t_lam]) <= lam * (1 + 1e-15))


def test_compactness_canonical_beta_margin():
    rep = compactness_diagnostics(canonical(), GRID)
    assert rep.verdict == "pass"
    beta = next(i for i in rep.items if i.label == "beta")
    assert beta.equiconvergence_margin * beta.equiconvergence_location == pytest.approx(0.125, rel=1e-8)


def test_compactness_no_forcing():
    rep = compactness_diagnostics(canonical(c=0.0, q_plus=0.4, gamma=GammaSpec("zero")), GRID)
    assert rep.verdict == "pass"
    rep = compactness_diagnostics(trivial(), GRID)
    assert rep.verdict == "pass"
    assert all(i.monotone_margin == 0 and i.equiconvergence_margin == 0 for i in rep.items)


def test_compactness_detects_leaving_band():
    rep = compactness_diagnostics(canonical(c=1.0), GRID)
    assert rep.verdict == "fail"


@settings(max_examples=15, deadline=None)
@given(kappa=st.floats(0.0, 0.5), c=st.floats(0.0, 0.2))
def test_T_nonnegative_nonincreasing(kappa, c):
    g = build_grid(1.0, 1e4, 256)
    T = apply_T(canonical(c=c), GridSeries(g, kappa / g.nodes)).values
    assert np.all(T >= 0)
    assert np.all(np.diff(T) <= 1e-15 * T[0])


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.01, 0.2))
def test_fixed_point_matches_quadratic_root(c):
    g = build_grid(1.0, 1e4, 512)
    res = picard_solve(canonical(c=c), g)
    # kappa^2 - kappa + c = 0, smaller root
    k = (1 - math.sqrt(1 - 4 * c)) / 2
    assert res.converged
    assert np.max(np.abs(res.b0.values * g.nodes - k)) < 1e-7

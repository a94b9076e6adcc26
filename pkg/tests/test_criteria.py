from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracsys import criteria as cr
from fracsys.fieldgrid import GridSpec, constant, gaussian
from fracsys.fraccalc import TestFuncSpec, TimeGrid
from fracsys.mildsolver import SystemParams, solve

P = SystemParams(0.5, 0.5, 2, 2)


# -- global existence --------------------------------------------------------------

def test_delta_window_examples():
    assert cr.delta_window(P, 12) == (0.0, 1.0)
    assert cr.delta_window(P, 2) == (0.0, 0.5)
    with pytest.raises(ValueError):
        cr.delta_window(SystemParams(0.5, 0.5, 1, 1), 2)


def test_delta_window_empty_is_signalled():
    with pytest.raises(cr.EmptyWindow):
        cr.delta_window(SystemParams(0.3, 0.9, 1.2, 1.5), 1)


def test_global_condition_threshold():
    # gamma1 = gamma2 = 0.5, p = q = 2: N/2 >= 1
    assert cr.critical_rhs(P) == pytest.approx(1.0)
    assert not cr.global_condition(P, 1)
    assert cr.global_condition(P, 2)
    # gamma -> 1 limit with p = q = 2: threshold N >= 2 as well
    near = SystemParams(0.999999, 0.999999, 2, 2)
    assert not cr.global_condition(near, 1) and cr.global_condition(near, 2)


def test_global_condition_ordering_errors():
    with pytest.raises(ValueError):
        cr.global_condition(SystemParams(0.7, 0.5, 2, 2), 3)
    with pytest.raises(ValueError):
        cr.global_condition(SystemParams(0.5, 0.5, 3, 2), 3)


def test_exponent_set_critical_case():
    e = cr.exponent_set(P, 2)
    assert e.delta == 0.25
    assert (e.s1, e.s2) == (4.0, 4.0)
    assert e.sigma1 == pytest.approx(0.375)
    assert e.r1 == pytest.approx(1.0) and e.r2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cr.exponent_set(P, 2, delta=0.6)


def test_exponent_identities_random_draws():
    draws = cr.admissible_draws(100, seed=3)
    assert len(draws) == 100
    for params, N in draws:
        e = cr.exponent_set(params, N)
        for name, res in e.identities(params, N).items():
            assert abs(res) <= 1e-12 * max(1.0, e.s1, e.s2), name
        assert all(e.orderings().values())


def test_infinity_rates_exceed_window_rate():
    e = cr.exponent_set(P, 2)
    a, b = cr.infinity_decay_rates(P, e)
    assert a >= e.sigma1 and b >= e.sigma2


# -- blow-up -----------------------------------------------------------------------------

def test_regions_examples():
    assert cr.blowup_regions(P, 1) == (True, True)
    assert cr.blowup_regions(P, 100) == (False, False)
    a = SystemParams(0.3, 0.8, 1.5, 4.0)
    b = SystemParams(0.8, 0.3, 4.0, 1.5)
    for N in (1, 2, 3, 5):
        r = cr.blowup_regions(a, N)
        assert cr.blowup_regions(b, N) == (r[1], r[0])
    with pytest.raises(ValueError):
        cr.blowup_regions(SystemParams(0.5, 0.5, 1, 2), 1)


def test_blowup_exponents_signs_and_conjugate():
    d1, d2 = cr.blowup_exponents(P, 1)
    assert min(d1, d2) < 0
    assert 1 / 3.0 + 1 / cr.conjugate(3.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cr.conjugate(1.0 + 1e-13)


def test_blowup_exponents_unit_orders():
    # gamma1 = 1: the trailing term vanishes, delta1 is the pure scaling balance
    one = SystemParams(0.9999999999, 0.9999999999, 2, 3)
    d1, _ = cr.blowup_exponents(one, 1)
    A = 4 + 2
    p, q = 2.0, 3.0
    want = max((-4 / q + A * 0.5 / q - 4 + A * (2 / 3)) * p * q / (p * q - 1),
               (-4 / q + A * 0.5 / q - 4 + A * (2 / 3)) * p * q / (p * q - 1))
    assert d1 == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("p, q, N, want", [(1, 2, 1, True), (1, 4, 1, False), (2, 1, 3, False)])
def test_fujita_edge(p, q, N, want):
    assert cr.fujita_edge(SystemParams(0.5, 0.5, p, q), N) is want


def test_fujita_edge_errors():
    with pytest.raises(ValueError):
        cr.fujita_edge(P, 1)
    with pytest.raises(ValueError):
        cr.fujita_edge(SystemParams(0.5, 0.5, 1, 1), 1)


# -- chi and Z ------------------------------------------------------------------------

def test_chi_mass_oracle():
    want = 2 * quad(lambda x: math.exp(-math.sqrt(1 + x * x)), 0, math.inf)[0]
    assert cr.chi_mass(1) == pytest.approx(want, rel=1e-12)
    want2 = 2 * math.pi * quad(lambda r: r * math.exp(-math.sqrt(4 + r * r)), 0, math.inf)[0]
    assert cr.chi_mass(2) == pytest.approx(want2, rel=1e-12)


def test_chi_weight_normalized_and_supersolution():
    spec = GridSpec(1, 20.0, 256)
    chi = cr.chi_weight(spec)
    assert chi.integral() == pytest.approx(1.0, abs=1e-12)
    lap = spec.irfft(-spec.k2 * spec.rfft(chi.values))
    interior = np.abs(spec.axis) < 15
    assert np.all((lap + chi.values)[interior] >= -1e-12)


def test_chi_weight_rejects_small_box():
    with pytest.raises(ValueError, match="L="):
        cr.chi_weight(GridSpec(1, 5.0, 64))
    with pytest.raises(ValueError):
        cr.chi_weight(GridSpec(1, 20.0, 64))


def test_z_functional():
    spec = GridSpec(1, 20.0, 256)
    chi = cr.chi_weight(spec)
    zero = constant(spec, 0.0)
    one = constant(spec, 1.0)
    assert cr.z_functional(zero, zero, chi) == 0.0
    assert cr.z_functional(one, one, chi) == pytest.approx(2.0, rel=1e-12)
    v = gaussian(spec, 2.0, 3.0)
    lhs = cr.z_functional(v * 0.0 + constant(spec, 0.0), constant(spec, 0.0), chi)
    assert lhs == 0.0
    # Jensen: int v^p chi >= (int v chi)^p
    vp = v.with_values(v.values ** 2)
    assert cr.z_functional(vp, zero, chi) >= cr.z_functional(v, zero, chi) ** 2
    with pytest.raises(ValueError):
        cr.z_functional(one, constant(GridSpec(1, 20.0, 128), 1.0), chi)


def test_blowup_time_bound_examples():
    want = ((math.log(2) / 2) * math.gamma(1.5)) ** 2
    assert cr.blowup_time_bound(2, 0.5, 8) == pytest.approx(want, rel=1e-14)
    assert cr.blowup_time_bound(2, 0.5, 8) == pytest.approx(0.0943367, rel=1e-6)
    z0 = 20.0
    assert cr.blowup_time_bound(3, 1.0, z0) == pytest.approx(
        math.log(1 - 2 ** 3 * z0 ** -2) / (2 * (1 - 3)), rel=1e-14)
    assert cr.blowup_time_bound(2, 0.5, 4 + 1e-9) > 10
    with pytest.raises(ValueError):
        cr.blowup_time_bound(2, 0.5, 4.0)


def test_ode_oracle():
    p, z0 = 2.0, 8.0
    assert cr.ode_oracle(p, z0, 0.0) == pytest.approx(z0)
    h = 1e-6
    slope = (cr.ode_oracle(p, z0, h) - cr.ode_oracle(p, z0, 0.0)) / h
    assert slope == pytest.approx(2 ** (1 - p) * z0 ** p - 2 * z0, rel=1e-4)
    t_star = cr.blowup_time_bound(p, 1.0, z0)
    assert cr.ode_oracle(p, z0, 0.999 * t_star) > 100 * z0
    with pytest.raises(ValueError):
        cr.ode_oracle(p, z0, t_star)


def test_rescaled_lower_solution():
    p, z0 = 2.0, 8.0
    t = np.linspace(0, 0.3, 7)
    np.testing.assert_allclose(cr.rescale_lower_solution(p, z0, 1.0, t), cr.ode_oracle(p, z0, t))
    assert cr.rescale_lower_solution(p, z0, 0.5, 0.0) == z0
    tb = cr.blowup_time_bound(p, 0.5, z0)
    assert cr.rescale_lower_solution(p, z0, 0.5, 0.999 * tb) > 50 * z0
    with pytest.raises(ValueError):
        cr.rescale_lower_solution(p, z0, 0.5, tb * 1.0001)


def test_blowup_report():
    rep = cr.blowup_report(P, 1, z0=8.0)
    assert rep.z_bound_applicable and rep.t_star_bound == pytest.approx(0.0943367, rel=1e-6)
    rep = cr.blowup_report(P, 1, z0=3.0)
    assert not rep.z_bound_applicable and rep.t_star_bound is None
    assert not cr.blowup_report(SystemParams(0.5, 0.6, 2, 2), 1, z0=8.0).z_bound_applicable


# -- sweep and CSV --------------------------------------------------------------------

def test_evaluate_point_flags_not_drops():
    row = cr.evaluate_point(0.7, 0.5, 2, 3, 2)
    assert "gamma2<gamma1" in row.hypotheses
    assert row.global_ok is None
    assert row.region1 is not None
    ok = cr.evaluate_point(0.5, 0.5, 2, 2, 2)
    assert ok.hypotheses == "ok" and ok.global_ok is True
    edge = cr.evaluate_point(0.5, 0.5, 1, 2, 1)
    assert edge.region1 is None and "p_or_q_eq_1" in edge.hypotheses


def test_criteria_csv(tmp_path):
    rows = [cr.evaluate_point(0.5, 0.6, p, q, 2) for p in (1.5, 2.0) for q in (1.5, 3.0)]
    path = tmp_path / "c.csv"
    cr.write_criteria_csv(rows, path)
    with open(path, newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == cr.CRITERIA_HEADER
    assert len(table) == 5
    assert table[1][5] in ("true", "false", "NA")


def test_parameter_sweep_small():
    res = cr.parameter_sweep(500, seed=1)
    assert len(res.rows) == 500
    assert all(r.hypotheses == "ok" for r in res.rows)
    assert res.coherence_findings == [] and res.exclusivity_findings == []
    assert "500 points" in res.summary()


# -- trajectory analyses ------------------------------------------------------------------

def test_combined_decay_constant():
    t = np.linspace(0, 20, 201)
    y = 3.0 * (1 + t) ** -0.5
    K, holds = cr.combined_decay_constant(t, y, 0.5)
    assert holds and K >= 3.0


def test_decay_verify_zero_and_errors():
    spec = GridSpec(2, 16.0, 32)
    e = cr.exponent_set(P, 2)
    zero = constant(spec, 0.0)
    tr = solve(P, zero, zero, TimeGrid(2.0, 8), norm_exponents=(e.s1, e.s2))
    rep = cr.decay_verify(tr, e, (1.0, 2.0), refined=tr)
    assert rep.constant == 0.0 and rep.stable
    with pytest.raises(ValueError):
        cr.decay_verify(tr, e, (1.0, 5.0))
    bad = solve(P, zero, zero, TimeGrid(2.0, 8))
    with pytest.raises(ValueError):
        cr.decay_verify(bad, e, (1.0, 2.0))
    blow = solve(P, constant(spec, 3.0), constant(spec, 3.0), TimeGrid(2.0, 64),
                 norm_exponents=(e.s1, e.s2), blowup_threshold=1e3)
    with pytest.raises(cr.NotApplicable):
        cr.decay_verify(blow, e, (1.0, 2.0))


def test_linear_decay_rate_bound():
    # ||P(t) u0||_inf <= C(t) ||u0||_1 with the heat-kernel constant
    from fracsys.subord import lp_lq_constant

    g = 0.5
    lin = SystemParams(g, g, 2, 2, sign_f=0, sign_g=0)
    spec = GridSpec(1, 80.0, 1024)
    u0 = gaussian(spec, 1.0, 1.0)
    tr = solve(lin, u0, u0, TimeGrid(20.0, 40), store_every=0)
    m1 = tr.norms["u_1"][0]
    for t, sup in zip(tr.times[1:], tr.norms["u_inf"][1:]):
        assert sup <= 1.01 * lp_lq_constant(g, 1, 1.0, t) * m1


def test_bump():
    spec = GridSpec(1, 8.0, 128)
    phi, lap = cr.bump(spec)
    assert phi.max() == 1.0 and phi[np.abs(spec.axis) >= 4.0].max() == 0.0
    # centered differences (the bump is only C^2, so a spectral check would ring)
    fine = GridSpec(1, 8.0, 4096)
    phi, lap = cr.bump(fine)
    fd = (np.roll(phi, 1) - 2 * phi + np.roll(phi, -1)) / fine.dx ** 2
    assert np.max(np.abs(fd - lap)) < 5e-3 * np.max(np.abs(lap))  # O(dx) at the support edge
    phi2, lap2 = cr.bump(GridSpec(2, 8.0, 64), radius=3.0)
    assert phi2[32, 32] == 1.0 and lap2[32, 32] == pytest.approx(-6 * 2 / 9)


def test_weak_residual_zero_and_control():
    spec = GridSpec(1, 10.0, 64)
    lin = SystemParams(0.5, 0.5, 2, 2, sign_f=0, sign_g=0)
    zero = constant(spec, 0.0)
    tr = solve(lin, zero, zero, TimeGrid(1.0, 16))
    assert tuple(cr.weak_residual(tr, TestFuncSpec(l=2, horizon=1.0))) == (0.0, 0.0)

    u0 = gaussian(spec, 1.0, 1.0)
    tr = solve(lin, u0, u0, TimeGrid(1.0, 128))
    test = TestFuncSpec(l=2, horizon=1.0)
    good = cr.weak_residual(tr, test)
    bad = cr.weak_residual(tr, test, u0=u0 * 1.05)
    assert good.rel_u < 1e-3
    assert bad.rel_u > 10 * good.rel_u
    with pytest.raises(ValueError):
        cr.weak_residual(tr, TestFuncSpec(l=2, horizon=2.0))
    thin = solve(lin, u0, u0, TimeGrid(1.0, 16), store_every=4)
    with pytest.raises(ValueError):
        cr.weak_residual(thin, test)

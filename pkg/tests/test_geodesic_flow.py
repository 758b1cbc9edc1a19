import math

import numpy as np
import pytest
from scipy.integrate import quad

from string_geodesics.chart_atlas import Chart, CotangentState, Q, hamiltonian, to_chart, vector_field
from string_geodesics.geodesic_flow import (
    ConservedSet,
    InfeasibleError,
    closure_momentum,
    completeness_probe,
    init_null,
    integrate,
    precession,
    sphere_geodesic,
    sphere_point,
    switch_policy,
)


def ef(w, U=1.0, W=0.0, u=0.0):
    return CotangentState(Chart.EF_ADV, (u, w), (U, W))


@pytest.fixture(scope="module")
def case2():
    cs, geo, st = init_null(1.0, ef(0.1, 1.0), direction=1)
    return cs, geo, st, integrate(st, cs, (0.0, 100.0), tol=1e-12)


@pytest.fixture(scope="module")
def case1():
    cs, geo, st = init_null(1.0, ef(-1 / 3, 0.3), direction=1)
    return cs, geo, st, integrate(st, cs, (0.0, 60.0), tol=1e-12)


# --- init_null -----------------------------------------------------------------


def test_radial_start_freezes_the_sphere():
    cs, geo, st = init_null(0.0, ef(0.2, 1.0))
    assert st.momenta[1] == 0 and geo.rate == 0
    assert np.allclose(sphere_point(geo, 0.0), sphere_point(geo, 123.4))


def test_quadratic_completion_roots():
    # at w = 1/6, Q = -1/16, so U^2 + 4 Q H needs U >= 1 for H = 1
    with pytest.raises(InfeasibleError):
        init_null(1.0, ef(1 / 6, 0.1))
    roots = set()
    for d in (1, -1):
        cs, _, st = init_null(1.0, ef(1 / 6, 1.5), direction=d)
        assert hamiltonian(st) == pytest.approx(1.0, abs=1e-12)
        roots.add(round(st.momenta[1], 12))
        # direction is the sign of dw/ds
        assert np.sign(vector_field(st)[1]) == d
    expected = np.roots([Q(1 / 6), 1.5, -1.0])
    assert sorted(roots) == pytest.approx(sorted(expected), abs=1e-12)


def test_horizon_completion_is_linear():
    cs, geo, st = init_null(1.0, ef(2 / 3, 0.1))
    assert st.momenta[1] == pytest.approx(10.0, abs=1e-12)
    assert geo.rate == pytest.approx(math.sqrt(2.0))
    assert cs.total == 0


# --- sphere factor ---------------------------------------------------------------


def test_sphere_geodesic_properties():
    geo = sphere_geodesic(0.7, normal=(1.0, 2.0, -0.5), theta0=0.4)
    n = np.array([1.0, 2.0, -0.5]) / np.linalg.norm([1.0, 2.0, -0.5])
    for s in np.random.default_rng(0).uniform(-50, 50, 100):
        x = sphere_point(geo, s)
        assert abs(np.dot(n, x)) <= 1e-14
        assert abs(np.linalg.norm(x) - 1) <= 1e-14
    assert np.allclose(sphere_point(geo, 2 * math.pi / geo.rate), sphere_point(geo, 0.0), atol=1e-13)


# --- switch policy ---------------------------------------------------------------


def test_switch_policy_examples():
    assert switch_policy(ef(2 / 3 + 0.01)) is Chart.KS
    assert switch_policy(ef(2 / 3 - 0.01)) is Chart.KS
    assert switch_policy(ef(1 / 0.05 - 1 / 3)) is Chart.XU
    assert switch_policy(CotangentState(Chart.EF_RET, (0.0, 1 / 0.05 - 1 / 3), (1.0, 0.0))) is Chart.XV
    assert switch_policy(ef(-1 / 3 + 1e-3)) is Chart.EF_ADV
    assert switch_policy(ef(-1 / 3 - 1e-3)) is Chart.EF_ADV


def test_switch_policy_hysteresis():
    # r = 0.26 is outside the entry threshold but inside the exit band
    st = to_chart(CotangentState(Chart.SCHW, (0.0, 0.26), (0.1, 0.1)), Chart.XU)
    assert switch_policy(st, current=Chart.XU) is Chart.XU
    assert switch_policy(to_chart(st, Chart.EF_ADV)) is Chart.EF_ADV


# --- integration -----------------------------------------------------------------


def test_radial_closed_form():
    cs, _, st = init_null(0.0, ef(0.0, 1.0))
    tr = integrate(st, cs, (0.0, 50.0), tol=1e-10)
    assert np.max(np.abs(tr.omega() - tr.s)) <= 1e-10
    ef_rows = np.array([c == list(Chart).index(Chart.EF_ADV) for c in tr.chart])
    assert np.all(tr.y[ef_rows, 0] == 0.0)


def test_start_must_match_energy():
    with pytest.raises(ValueError):
        integrate(ef(0.1, 1.0, 1.0), ConservedSet(2.0, 1.0, 2.0), (0.0, 1.0))


def test_case2_event_sequence(case2):
    cs, _, _, tr = case2
    kinds = [e.kind for e in tr.physical_events()]
    cycle = ["horizon", "singularity", "horizon", "scri_plus", "turning_point", "scri_minus"]
    assert kinds[:12] == cycle * 2
    s = [e.s for e in tr.events]
    assert s == sorted(s)
    # the sheet flips at every singularity crossing
    for e in tr.events_of("singularity"):
        i = np.searchsorted(tr.s, e.s)
        assert tr.sheet[i - 1] * tr.sheet[min(i + 1, len(tr) - 1)] < 0


def test_case2_event_residuals(case2):
    _, _, _, tr = case2
    for e in tr.physical_events():
        st = e.state
        if e.kind == "horizon":
            if st.chart in (Chart.EF_ADV, Chart.EF_RET):
                assert abs(st.coords[1] - 2 / 3) <= 1e-10
            elif st.chart is Chart.KS:
                assert min(abs(st.coords[0]), abs(st.coords[1])) <= 1e-10
        elif e.kind in ("scri_plus", "scri_minus"):
            assert abs(st.coords[1] + 1 / 3) <= 1e-10
        elif e.kind == "singularity":
            assert abs(st.coords[1]) <= 1e-10


def test_case2_conservation(case2):
    cs, _, _, tr = case2
    assert len(tr.events_of("singularity")) >= 2
    assert tr.h_drift() <= 1e-8
    assert tr.u_drift() <= 1e-8
    assert np.all(np.diff(tr.s) > 0)
    assert np.max(np.abs(tr.energy() - cs.H2)) <= 1e-8  # total Hamiltonian stays zero


def _xdot_sq_residual(st, cs):
    """4 (dx/ds)^2 - (U^2 x^6 + 2H(1 - x^2)) at a sample with r > 0."""
    if st.chart is Chart.KS:
        st = to_chart(st, Chart.XU)
    if st.chart in (Chart.XU, Chart.XV):
        x = st.coords[1]
        xd = vector_field(st)[1]
    else:
        r = 1 / (st.coords[1] + 1 / 3)
        x = math.sqrt(r)
        xd = -0.5 * x**3 * vector_field(st)[1]
    return 4 * xd * xd - (cs.U**2 * x**6 + 2 * cs.H * (1 - x * x))


def test_turning_identity(case2):
    cs, _, _, tr = case2
    r = tr.radius()
    idx = np.flatnonzero((r > 0) & (r <= 4))[::5]
    assert len(idx) > 100
    worst = max(abs(_xdot_sq_residual(tr.state(i), cs)) for i in idx)
    assert worst <= 1e-9


def test_physical_only_stops_at_scri(case2):
    cs, _, st, _ = case2
    tr = integrate(st, cs, (0.0, 100.0), tol=1e-10, physical_only=True)
    assert tr.physical_events()[-1].kind in ("scri_plus", "scri_minus")
    assert tr.s[-1] < 100


def test_backward_run_mirrors_forward(case2):
    cs, _, st, _ = case2
    tr = integrate(st, cs, (0.0, -20.0), tol=1e-12)
    assert tr.s[0] == pytest.approx(-20.0) and tr.s[-1] == 0.0
    assert tr.h_drift() <= 1e-9


# --- precession --------------------------------------------------------------------


def _period_integral(H, U):
    """Affine period on segment B: twice the w-time between the turning points e1 < -1/3 < e2."""
    e1, e2, e3 = sorted(np.roots([0.5, 0, -1 / 6, -1 / 27 + U * U / (4 * H)]).real)
    # U^2 + 4QH = 2H (w - e1)(w - e2)(w - e3); the endpoint square roots go into the weight
    g = lambda w: 1 / math.sqrt(2 * H * (e3 - w))  # noqa: E731
    return 2 * quad(g, e1, e2, weight="alg", wvar=(-0.5, -0.5), epsabs=1e-14, epsrel=1e-13)[0]


def test_radial_passes_do_not_precess():
    cs, geo, st = init_null(0.0, ef(-0.2, 1.0))
    tr = integrate(st, cs, (-10.0, 10.0))
    assert all(p.theta_enter == p.theta_exit for p in precession(tr, geo))


def test_case1_precession_is_uniform(case1):
    cs, geo, _, tr = case1
    passes = precession(tr, geo)
    assert len(passes) >= 10
    d = np.array([p.theta_exit - p.theta_enter for p in passes])
    assert np.ptp(d) <= 1e-6
    # period of the string motion from the events and from the quadrature oracle
    periods = np.diff([p.s_enter for p in passes])
    assert np.ptp(periods) <= 1e-8
    assert periods.mean() == pytest.approx(_period_integral(cs.H, cs.U), rel=1e-8)
    assert np.all(np.diff([p.theta_enter for p in passes]) > 0)


def test_tuned_closure():
    H = 1.0
    U = closure_momentum(H)
    cs, geo, st = init_null(H, ef(-1 / 3, U), direction=1)
    tr = integrate(st, cs, (0.0, 80.0), tol=1e-12)
    passes = precession(tr, geo)
    assert len(passes) >= 4
    advance = passes[3].theta_enter - passes[0].theta_enter
    assert advance == pytest.approx(8 * math.pi, abs=1e-6)
    assert passes[1].theta_enter - passes[0].theta_enter == pytest.approx(8 * math.pi / 3, abs=1e-6)


# --- completeness --------------------------------------------------------------------


def test_degenerate_u_zero_probe():
    cs, _, st = init_null(1.0, CotangentState(Chart.EF_ADV, (0.0, 1.0), (0.0, 0.0)), direction=1)
    assert cs.U == 0
    rep = completeness_probe(st, cs, 200.0)
    assert rep.complete and rep.reached_s == (-200.0, 200.0)
    assert rep.h_drift <= 1e-8
    tr = integrate(st, cs, (0.0, 50.0), tol=1e-12)
    assert tr.omega().min() >= 2 / 3 - 1e-6
    assert len(tr.events_of("singularity")) >= 2


def test_radial_probe_approaches_the_singularity_asymptotically():
    cs, _, st = init_null(0.0, ef(0.0, 1.0))
    rep = completeness_probe(st, cs, 1e4)
    assert rep.complete and rep.singularity_crossings == 0
    tr = integrate(st, cs, (0.0, 1e4))
    assert tr.radius()[-1] == pytest.approx(1 / (1e4 + 1 / 3), rel=1e-8)

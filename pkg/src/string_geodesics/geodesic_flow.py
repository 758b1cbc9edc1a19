"""Null geodesics of the string-times-sphere product.

The string factor is integrated numerically by a compiled Runge-Kutta
kernel that hops between Eddington-Finkelstein, X (r = x^2) and
Kruskal-Szekeres charts; the sphere factor is a great circle in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import _kernel as K
from .chart_atlas import (
    U_FAMILY,
    V_FAMILY,
    Chart,
    CotangentState,
    Q,
    RegionLabel,
    ValidityError,
    classify_region,
    hamiltonian,
    is_valid,
    to_chart,
)
from .chart_atlas import _radius as _chart_radius
from .special_functions import WeierstrassInvariants, half_periods

__all__ = [
    "ConservedSet",
    "SphereGeodesic",
    "Event",
    "Trajectory",
    "SwitchThresholds",
    "Pass",
    "ProbeReport",
    "InfeasibleError",
    "IntegrationError",
    "LeftAtlasError",
    "init_null",
    "integrate",
    "join_runs",
    "switch_policy",
    "sphere_point",
    "sphere_geodesic",
    "precession",
    "closure_momentum",
    "completeness_probe",
    "invariants_of",
    "r_momentum",
    "cusp_profile",
]

DEFAULT_TOL = 1e-10
EVENT_KINDS = ("horizon", "scri_plus", "scri_minus", "singularity", "chart_switch", "turning_point")


class InfeasibleError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


class LeftAtlasError(IntegrationError):
    pass


@dataclass(frozen=True)
class ConservedSet:
    H: float
    U: float
    H2: float

    @property
    def total(self) -> float:
        """H_string - H_sphere; zero on a null geodesic."""
        return self.H - self.H2


def invariants_of(conserved: ConservedSet) -> WeierstrassInvariants:
    """Invariants of the cubic 4w^3 - g2 w - g3 governing w(s)."""
    H, U = conserved.H, conserved.U
    if H == 0:
        raise ValueError("the elliptic curve needs H != 0")
    return WeierstrassInvariants(4.0 / 3.0, 8.0 / 27.0 - 2.0 * U * U / H)


# ---------------------------------------------------------------------------
# sphere factor


@dataclass(frozen=True)
class SphereGeodesic:
    n: tuple
    theta0: float
    rate: float
    a: tuple = field(default=(1.0, 0.0, 0.0))
    b: tuple = field(default=(0.0, 1.0, 0.0))

    def angle(self, s):
        return self.theta0 + self.rate * np.asarray(s, dtype=float)


def _frame(n):
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("plane normal must be nonzero")
    n = n / norm
    # least aligned basis vector gives a well-conditioned first axis
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    a = e - n * (n @ e)
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    return n, a, b


def sphere_geodesic(H2: float, normal=(0.0, 0.0, 1.0), theta0: float = 0.0) -> SphereGeodesic:
    if H2 < 0:
        raise ValueError("sphere energy must be nonnegative")
    n, a, b = _frame(normal)
    return SphereGeodesic(tuple(n), float(theta0), math.sqrt(2.0 * H2), tuple(a), tuple(b))


def sphere_point(geo: SphereGeodesic, s):
    """Point of the great circle at parameter s (array of shape (..., 3))."""
    th = geo.angle(s)
    a, b = np.asarray(geo.a), np.asarray(geo.b)
    return np.cos(th)[..., None] * a + np.sin(th)[..., None] * b


# ---------------------------------------------------------------------------
# initial data


def _root(a, b, c, direction):
    """Root X of aX^2 + bX + c = 0 with sign(2aX + b) = direction."""
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise InfeasibleError("no real momentum reaches the requested energy here")
    sq = direction * math.sqrt(disc)
    if a == 0 or abs(a) * max(1.0, abs(c)) < 1e-15 * b * b:
        if b == 0:
            raise InfeasibleError("momentum equation is degenerate at this point")
        return -c / b
    if b + sq != 0:
        return -2.0 * c / (b + sq)
    return (sq - b) / (2.0 * a)


def init_null(
    H2: float,
    string_start: CotangentState,
    direction: int = 1,
    normal=(0.0, 0.0, 1.0),
    theta0: float = 0.0,
):
    """Complete the string momentum so that H_string = H2.

    The first momentum component (U, V or the Schwarzschild energy T) is
    kept; the second is solved for, with `direction` the sign of the rate
    of change of the second coordinate when the equation is quadratic.
    Returns (ConservedSet, SphereGeodesic, completed state).
    """
    if H2 < 0:
        raise ValueError("H2 must be nonnegative")
    if not is_valid(string_start):
        raise ValidityError("start state is not valid in its chart")
    direction = 1 if direction >= 0 else -1
    st = string_start
    c1, c2 = st.coords
    m1 = st.momenta[0]
    ch = st.chart
    if ch in (Chart.EF_ADV, Chart.EF_RET):
        m2 = _root(Q(c2), m1, -H2, direction)
    elif ch in (Chart.XU, Chart.XV):
        m2 = _root((1 - c2 * c2) / 8.0, -(c2**3) * m1 / 2.0, -H2, direction)
    elif ch is Chart.SCHW:
        r = c2
        rad = (r**3 * m1 * m1 / (r - 1) - 2.0 * H2) / (r * (r - 1))
        if rad < 0:
            raise InfeasibleError("no real radial momentum reaches the requested energy here")
        # dr/ds = -r(r-1)R
        m2 = -direction * np.sign(r * (r - 1)) * math.sqrt(rad)
    else:
        raise ValueError(f"init_null supports EF, X and SCHW starts, not {ch.value}")
    state = replace(st, momenta=(m1, float(m2)))
    U = m1 if (ch in U_FAMILY or ch is Chart.SCHW) else -m1
    return ConservedSet(float(H2), float(U), float(H2)), sphere_geodesic(H2, normal, theta0), state


# ---------------------------------------------------------------------------
# chart switching


@dataclass(frozen=True)
class SwitchThresholds:
    x_in: float = 0.25  # enter an X chart below this r
    ks_in: float = 0.15  # enter KS when |r - 1| is below this
    band: float = 0.10  # hysteresis as a fraction of the trigger
    swap: float = 0.9  # swap EF families when |other W| < swap |W|
    h_max: float = 0.5

    @property
    def x_out(self) -> float:
        return self.x_in * (1 + self.band)

    @property
    def ks_out(self) -> float:
        return self.ks_in * (1 + self.band)

    def params(self) -> np.ndarray:
        return np.array([self.x_in, self.x_out, self.ks_in, self.ks_out, self.swap, self.h_max])


DEFAULT_THRESHOLDS = SwitchThresholds()

_KIND = {
    Chart.EF_ADV: K.KIND_EF,
    Chart.EF_RET: K.KIND_EF,
    Chart.XU: K.KIND_X,
    Chart.XV: K.KIND_X,
    Chart.KS: K.KIND_KS,
}


def _radius(state: CotangentState) -> float:
    return float(_chart_radius(state))


def _ef_family(state: CotangentState) -> CotangentState:
    """The EF chart of the state with the smaller |W| among those reachable."""
    best = None
    for ch in (Chart.EF_ADV, Chart.EF_RET):
        try:
            cand = to_chart(state, ch)
        except (ValueError, ArithmeticError):
            continue
        if best is None or abs(cand.momenta[1]) < abs(best.momenta[1]):
            best = cand
    if best is None:
        raise LeftAtlasError(f"no EF chart covers {state}")
    return best


def switch_policy(
    state: CotangentState,
    current: Chart | None = None,
    thresholds: SwitchThresholds = DEFAULT_THRESHOLDS,
) -> Chart:
    """Chart the integrator should use at this state.

    X charts near r = 0, KS near the horizon, EF elsewhere (including scri).
    With `current` given, the exit thresholds are widened by the hysteresis
    band so a state near a boundary keeps its chart.
    """
    r = _radius(state)
    cur = Chart(current) if current is not None else state.chart
    x_lim = thresholds.x_out if cur in (Chart.XU, Chart.XV) else thresholds.x_in
    ks_lim = thresholds.ks_out if cur is Chart.KS else thresholds.ks_in
    if 0 <= r < x_lim:
        if cur in (Chart.XU, Chart.XV):
            return cur
        return Chart.XV if (state.chart in V_FAMILY or state.chart is Chart.YQ) else Chart.XU
    if abs(r - 1) < ks_lim:
        return Chart.KS
    if cur in (Chart.EF_ADV, Chart.EF_RET):
        return cur
    if cur in (Chart.XU, Chart.XP, Chart.YP):
        return Chart.EF_ADV
    if cur in (Chart.XV, Chart.XQ, Chart.YQ):
        return Chart.EF_RET
    return _ef_family(state).chart


# ---------------------------------------------------------------------------
# trajectories

_CHARTS = tuple(Chart)
_CHART_INDEX = {c: i for i, c in enumerate(_CHARTS)}


@dataclass(frozen=True)
class Event:
    s: float
    kind: str
    region: RegionLabel
    state: CotangentState


@dataclass
class Trajectory:
    """Samples of the string factor, stored as arrays in their native charts.

    s is strictly increasing.  Row i of y holds (c1, c2, m1, m2) in chart
    charts[chart[i]], with the sheet and flip labels in the matching arrays.
    Kruskal-Szekeres rows are stored boosted along the Killing flow so they
    stay of order one: the true point is (p e^(c/2), q e^(-c/2)) with
    momenta (P e^(-c/2), Q e^(c/2)) for c = gauge[i].
    """

    s: np.ndarray
    y: np.ndarray
    chart: np.ndarray
    sheet: np.ndarray
    flip: np.ndarray
    events: list
    conserved: ConservedSet
    tol: float = DEFAULT_TOL
    gauge: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.s)

    def state(self, i: int) -> CotangentState:
        c = _CHARTS[int(self.chart[i])]
        row = self.y[i]
        return CotangentState(
            c, (float(row[0]), float(row[1])), (float(row[2]), float(row[3])),
            int(self.sheet[i]), int(self.flip[i]),
        )

    @property
    def samples(self):
        return [(float(self.s[i]), self.state(i)) for i in range(len(self))]

    def _eval(self):
        kinds = np.array([_KIND[_CHARTS[c]] for c in self.chart], dtype=np.int64)
        h = np.empty(len(self))
        w = np.empty(len(self))
        K.eval_samples(kinds, np.ascontiguousarray(self.y), h, w)
        return h, w

    def energy(self) -> np.ndarray:
        return self._eval()[0]

    def omega(self) -> np.ndarray:
        """w = 1/r - 1/3 at every sample (inf at r = 0)."""
        return self._eval()[1]

    def radius(self) -> np.ndarray:
        w = self.omega()
        with np.errstate(divide="ignore"):
            return 1.0 / (w + 1.0 / 3.0)

    def h_drift(self) -> float:
        return float(np.max(np.abs(self.energy() - self.conserved.H)))

    def u_drift(self) -> float:
        """Largest change of |U| over the samples where u or v is a coordinate."""
        mask = np.array([_CHARTS[c] in U_FAMILY or _CHARTS[c] in V_FAMILY for c in self.chart])
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(np.abs(self.y[mask, 2]) - abs(self.conserved.U))))

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]

    def physical_events(self) -> list:
        """Events other than chart switches, in order."""
        return [e for e in self.events if e.kind != "chart_switch"]


def _scri_kind(kind: int, y) -> str:
    """Outgoing crossings (w decreasing with s) reach scri+, incoming ones leave scri-."""
    f = np.empty(4)
    K.rhs(kind, np.asarray(y, dtype=float), f)
    return "scri_plus" if f[1] < 0 else "scri_minus"


_CODE_KIND = {K.EV_HORIZON: "horizon", K.EV_SINGULARITY: "singularity", K.EV_TURNING: "turning_point"}


def _labels(chart: Chart, y, sheet: int, flip: int) -> tuple[int, int]:
    if chart in (Chart.XU, Chart.XV) and y[1] != 0:
        sheet = 1 if y[1] > 0 else -1
    return sheet, flip


def _state_from(chart: Chart, y, sheet: int, flip: int) -> CotangentState:
    return CotangentState(chart, (float(y[0]), float(y[1])), (float(y[2]), float(y[3])), sheet, flip)


def _region(st: CotangentState) -> RegionLabel:
    try:
        return classify_region(st)
    except (ValueError, ArithmeticError):
        return RegionLabel("boundary", st.sheet, "schwarzschild")


class _Buffer:
    def __init__(self, n=4096, m=256):
        self.s = np.empty(n)
        self.y = np.empty((n, 4))
        self.es = np.empty(m)
        self.ec = np.empty(m, dtype=np.int64)
        self.ey = np.empty((m, 4))

    def grow(self, ns, ne):
        if ns >= len(self.s) - 1:
            self.s = np.concatenate([self.s, np.empty(len(self.s))])
            self.y = np.concatenate([self.y, np.empty_like(self.y)])
        if ne + 3 >= len(self.es):
            self.es = np.concatenate([self.es, np.empty(len(self.es))])
            self.ec = np.concatenate([self.ec, np.empty_like(self.ec)])
            self.ey = np.concatenate([self.ey, np.empty_like(self.ey)])


def _enter(state: CotangentState, thresholds: SwitchThresholds) -> CotangentState:
    """Move a state into the chart the policy chooses for it."""
    target = switch_policy(state, None, thresholds)
    if target in (Chart.EF_ADV, Chart.EF_RET) and state.chart not in _KIND:
        return _ef_family(state)
    try:
        return to_chart(state, target)
    except (ValueError, ArithmeticError) as exc:
        raise LeftAtlasError(f"cannot move {state} into {target.value}: {exc}") from exc


def _next_state(state: CotangentState, thresholds: SwitchThresholds) -> CotangentState:
    """Chart change after the kernel reports a switch is due."""
    target = switch_policy(state, state.chart, thresholds)
    if target is state.chart and state.chart in (Chart.EF_ADV, Chart.EF_RET):
        target = Chart.EF_RET if state.chart is Chart.EF_ADV else Chart.EF_ADV
        return to_chart(state, target)
    if target is state.chart:
        return state
    if state.chart is Chart.KS and target in (Chart.EF_ADV, Chart.EF_RET):
        return _ef_family(state)
    try:
        return to_chart(state, target)
    except (ValueError, ArithmeticError) as exc:
        raise LeftAtlasError(f"cannot move {state} into {target.value}: {exc}") from exc


def _gauge_sign(chart: Chart) -> int:
    """+1 if the first coordinate is u, -1 if it is v, 0 for KS."""
    if chart in U_FAMILY:
        return 1
    if chart in V_FAMILY:
        return -1
    return 0


def _reduce(state: CotangentState, c: float):
    """Translate along the Killing flow so the null coordinate vanishes.

    Returns the reduced state and the new offset c, with u = u' + c (or
    v = v' - c).  KS states are returned unchanged.
    """
    sg = _gauge_sign(state.chart)
    if sg == 0:
        return state, c
    first = state.coords[0]
    return replace(state, coords=(0.0, state.coords[1])), c + sg * first


def _restore(chart: Chart, y, c: float):
    y = np.array(y, dtype=float)
    y[0] += _gauge_sign(chart) * c
    return y


def integrate(
    start: CotangentState,
    conserved: ConservedSet,
    s_span,
    tol: float = DEFAULT_TOL,
    thresholds: SwitchThresholds = DEFAULT_THRESHOLDS,
    physical_only: bool = False,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate the string geodesic from `start` at s_span[0] to s_span[1].

    Either end of the span may be the larger.  The returned samples are in
    increasing s.  With physical_only the run stops at the first crossing
    of scri.
    """
    s0, s1 = float(s_span[0]), float(s_span[1])
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    h_start = float(hamiltonian(start))
    if abs(h_start - conserved.H) > max(1e3 * tol, 1e-8) * (1 + abs(conserved.H)):
        raise ValueError(f"start has H = {h_start!r}, expected {conserved.H!r}")
    c = 0.0
    if _gauge_sign(start.chart):
        start, c = _reduce(start, c)
    state, c = _reduce(_enter(start, thresholds), c)
    params = thresholds.params()
    buf = _Buffer()
    buf.s[0] = s0
    buf.y[0] = _restore(state.chart, state.as_array(), c)
    charts, sheets, flips, gauges = [state.chart], [state.sheet], [state.flip], [c]
    ns, ne = 1, 0
    events = []
    s = s0
    sgn = 1.0 if s1 >= s0 else -1.0
    h = min(1e-2, abs(s1 - s0)) or 1e-2
    steps = 0
    stop = False
    while not stop:
        kind = _KIND[state.chart]
        status, s, y, h, ns_new, ne_new = K.advance(
            kind, np.array(state.as_array(), dtype=float), s, s1, h, tol, tol, params,
            buf.s, buf.y, ns, buf.es, buf.ec, buf.ey, ne, max_steps - steps,
        )
        steps += ns_new - ns
        sheet, flip = state.sheet, state.flip
        g = _gauge_sign(state.chart) * c
        for i in range(ns, ns_new):
            sh, fl = _labels(state.chart, buf.y[i], sheet, flip)
            buf.y[i, 0] += g
            charts.append(state.chart)
            sheets.append(sh)
            flips.append(fl)
            gauges.append(c)
        for j in range(ne, ne_new):
            ey = _restore(state.chart, buf.ey[j], c)
            sh, fl = _labels(state.chart, ey, sheet, flip)
            est = _state_from(state.chart, ey, sh, fl)
            code = int(buf.ec[j])
            name = _scri_kind(kind, buf.ey[j]) if code == K.EV_SCRI else _CODE_KIND[code]
            events.append(Event(float(buf.es[j]), name, _region(est), est))
            if physical_only and code == K.EV_SCRI:
                # drop everything integrated past the crossing
                keep = sum(1 for k in range(ns_new) if (buf.s[k] - buf.es[j]) * sgn < 0)
                buf.s[keep] = buf.es[j]
                buf.y[keep] = ey
                charts, sheets = charts[:keep] + [state.chart], sheets[:keep] + [sh]
                flips, gauges = flips[:keep] + [fl], gauges[:keep] + [c]
                ns_new, ne_new = keep + 1, j + 1
                stop = True
                break
        ns, ne = ns_new, ne_new
        sheet, flip = _labels(state.chart, y, sheet, flip)
        state = _state_from(state.chart, y, sheet, flip)
        if stop or status == K.STATUS_DONE:
            break
        if status == K.STATUS_FULL:
            buf.grow(ns, ne)
            continue
        if status == K.STATUS_SWITCH:
            new = _next_state(state, thresholds)
            if new.chart is not state.chart:
                shown = _state_from(new.chart, _restore(new.chart, new.as_array(), c), new.sheet, new.flip)
                events.append(Event(float(s), "chart_switch", _region(shown), shown))
            state, c = _reduce(new, c)
            continue
        if status == K.STATUS_UNDERFLOW:
            raise IntegrationError(f"step size underflow at s = {s!r} in {state.chart.value}: {state}")
        if status == K.STATUS_MAXSTEPS:
            raise IntegrationError(f"step limit reached at s = {s!r}")
        raise IntegrationError(f"kernel returned status {status} at s = {s!r}")
    order = slice(None) if s1 >= s0 else slice(None, None, -1)
    events.sort(key=lambda e: sgn * e.s)
    if s1 < s0:
        events = events[::-1]
    return Trajectory(
        np.ascontiguousarray(buf.s[:ns][order]),
        np.ascontiguousarray(buf.y[:ns][order]),
        np.array([_CHART_INDEX[ch] for ch in charts], dtype=np.int8)[order].copy(),
        np.array(sheets, dtype=np.int8)[order].copy(),
        np.array(flips, dtype=np.int8)[order].copy(),
        events,
        conserved,
        tol,
        np.array(gauges)[order].copy(),
    )


def join_runs(back: Trajectory, fwd: Trajectory) -> Trajectory:
    """Concatenate a backward and a forward run that start from the same state."""
    if back.s[-1] != fwd.s[0]:
        raise ValueError("runs do not share their starting sample")

    def cat(a, b):
        return np.concatenate([a, b[1:]])

    return Trajectory(
        cat(back.s, fwd.s), np.concatenate([back.y, fwd.y[1:]]), cat(back.chart, fwd.chart),
        cat(back.sheet, fwd.sheet), cat(back.flip, fwd.flip), back.events + fwd.events,
        fwd.conserved, fwd.tol, cat(back.gauge, fwd.gauge),
    )


# ---------------------------------------------------------------------------
# precession


@dataclass(frozen=True)
class Pass:
    s_enter: float
    s_exit: float
    theta_enter: float
    theta_exit: float


def precession(traj: Trajectory, geo: SphereGeodesic) -> list:
    """Complete passes through the exterior -1/3 < w < 2/3 on the sheet x > 0.

    A pass is bounded by scri or horizon events; runs cut off by the ends
    of the trajectory are left out.  Angles are unwrapped.
    """
    w = traj.omega()
    inside = (w > -1.0 / 3.0) & (w < 2.0 / 3.0) & (traj.sheet > 0)
    bounds = [e.s for e in traj.events if e.kind in ("horizon", "scri_plus", "scri_minus")]
    bounds = np.array(sorted(bounds))
    passes = []
    n = len(w)
    i = 0
    while i < n:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and inside[j + 1]:
            j += 1
        if i > 0 and j < n - 1:
            before = bounds[(bounds >= traj.s[i - 1]) & (bounds <= traj.s[i])]
            after = bounds[(bounds >= traj.s[j]) & (bounds <= traj.s[j + 1])]
            if len(before) and len(after):
                s_in, s_out = float(before[-1]), float(after[0])
                passes.append(Pass(s_in, s_out, float(geo.angle(s_in)), float(geo.angle(s_out))))
        i = j + 1
    return passes


def closure_momentum(H: float, turns: float = 4.0 / 3.0) -> float:
    """U > 0 for which the sphere angle advances 2*pi*turns per string period.

    Only motion confined between scri and its nearest turning point is
    periodic with the real period; there the advance per period is
    4*omega1, which runs over (2*pi, inf) as U^2 goes over (0, 8H/27).
    """
    if not H > 0:
        raise ValueError("H must be positive")
    if not turns > 1:
        raise ValueError("the advance per period exceeds one full turn")
    target = 2.0 * math.pi * turns / 4.0
    u_max = math.sqrt(8.0 * H / 27.0)

    def f(U):
        lat = half_periods(invariants_of(ConservedSet(H, U, H)))
        return lat.omega1.real - target

    return float(brentq(f, u_max * 1e-4, u_max * (1 - 1e-9), xtol=1e-15, rtol=1e-15))


# ---------------------------------------------------------------------------
# completeness and the cusp


@dataclass(frozen=True)
class ProbeReport:
    reached_s: tuple
    obstruction: str | None
    h_drift: float
    u_drift: float
    singularity_crossings: int
    sheets: tuple

    @property
    def complete(self) -> bool:
        return self.obstruction is None


def completeness_probe(
    start: CotangentState,
    conserved: ConservedSet,
    S_max: float,
    tol: float = 1e-12,
    thresholds: SwitchThresholds = DEFAULT_THRESHOLDS,
) -> ProbeReport:
    """Integrate to s = +S_max and s = -S_max, reporting how far each side got."""
    reached = [0.0, 0.0]
    drifts, udrifts, crossings, sheets = [0.0], [0.0], 0, set()
    obstruction = None
    for k, end in enumerate((-S_max, S_max)):
        try:
            tr = integrate(start, conserved, (0.0, end), tol=tol, thresholds=thresholds)
        except IntegrationError as exc:
            obstruction = str(exc)
            continue
        reached[k] = float(tr.s[0] if end < 0 else tr.s[-1])
        drifts.append(tr.h_drift())
        udrifts.append(tr.u_drift())
        crossings += len(tr.events_of("singularity"))
        sheets.update(int(v) for v in np.unique(tr.sheet))
    return ProbeReport(
        tuple(reached), obstruction, max(drifts), max(udrifts), crossings, tuple(sorted(sheets))
    )


def r_momentum(state: CotangentState) -> float:
    """Momentum conjugate to r (at fixed u or v) of an X-chart state: X / (2x)."""
    if state.chart not in (Chart.XU, Chart.XV):
        state = to_chart(state, Chart.XU)
    x = state.coords[1]
    if x == 0:
        return math.copysign(math.inf, state.momenta[1])
    return state.momenta[1] / (2.0 * x)


@dataclass(frozen=True)
class CuspProfile:
    s_crossing: float
    deltas: np.ndarray
    r_momenta: np.ndarray
    components: np.ndarray  # X-chart (c1, c2, m1, m2) at each delta
    segment_max: np.ndarray  # componentwise max |.| over the X-chart run


def cusp_profile(traj: Trajectory, deltas=None, tol: float = 1e-12) -> CuspProfile:
    """States at s_c - delta before the first singularity crossing s_c."""
    sing = traj.events_of("singularity")
    if not sing:
        raise ValueError("trajectory does not reach the singularity")
    ev = sing[0]
    if deltas is None:
        deltas = 10.0 ** -np.arange(1, 10)
    deltas = np.asarray(deltas, dtype=float)
    i = int(np.searchsorted(traj.s, ev.s))
    xmask = np.array([_CHARTS[c] in (Chart.XU, Chart.XV) for c in traj.chart])
    lo = i - 1
    while lo > 0 and xmask[lo - 1]:
        lo -= 1
    hi = i
    while hi < len(xmask) - 1 and xmask[hi + 1]:
        hi += 1
    seg_max = np.max(np.abs(traj.y[lo:hi + 1]), axis=0)
    comps, rmom = [], []
    for d in deltas:
        tr = integrate(ev.state, traj.conserved, (0.0, -d), tol=tol)
        st = tr.state(0)
        comps.append(st.as_array())
        rmom.append(abs(r_momentum(st)))
    return CuspProfile(ev.s, deltas, np.array(rmom), np.array(comps), seg_max)

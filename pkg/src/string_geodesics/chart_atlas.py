"""Coordinate charts of the string surface, their Hamiltonians and transition maps.

Coordinates and momenta per chart (momentum i is conjugate to coordinate i):

=======  ==========  ===========================================
chart    coords      region
=======  ==========  ===========================================
SCHW     (t, r)      r not in {0, 1}
EF_ADV   (u, w)      w = 1/r - 1/3; regular through horizon and scri
EF_RET   (v, w)      as EF_ADV with the retarded null coordinate
KS       (p, q)      pq = (x^2 - 1) exp(x^2 - 1), x != 0
XU, XV   (u, x)      r = x^2; regular through x = 0
XT       (t, x)      x^2 != 1
XP, XQ   (p, x)      p != 0 (resp. q != 0)
YP, YQ   (p, y)      y = 1/x^2 = 1/r; p != 0 (resp. q != 0)
=======  ==========  ===========================================

Two discrete labels travel with a state.  ``sheet`` is the sign of x on the
double cover r = x^2.  ``flip`` is the sign of the exponentiated null
coordinate the chart uses (p for SCHW, XT and the u-charts, q for the
v-charts), so p = flip * exp((u - 1)/2) in EF_ADV.

Complex mode uses the same formulas with principal logarithms and square
roots; KS states then carry ``aux_x`` because x is not a single-valued
function of (p, q).
"""
from __future__ import annotations

import cmath
import enum
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .special_functions import lambert_w

__all__ = [
    "Chart",
    "CotangentState",
    "RegionLabel",
    "ValidityError",
    "OverlapError",
    "Q",
    "dQ",
    "metric",
    "hamiltonian",
    "hamiltonian_uniform",
    "vector_field",
    "to_chart",
    "surface_residual",
    "classify_region",
    "omega_of",
    "is_valid",
    "U_FAMILY",
    "V_FAMILY",
]


class ValidityError(ValueError):
    pass


class OverlapError(ValueError):
    pass


class Chart(str, enum.Enum):
    SCHW = "schw"
    EF_ADV = "ef_adv"
    EF_RET = "ef_ret"
    KS = "ks"
    XU = "xu"
    XV = "xv"
    XT = "xt"
    YP = "yp"
    YQ = "yq"
    XP = "xp"
    XQ = "xq"


U_FAMILY = frozenset({Chart.EF_ADV, Chart.XU})
V_FAMILY = frozenset({Chart.EF_RET, Chart.XV})


@dataclass(frozen=True)
class CotangentState:
    chart: Chart
    coords: tuple
    momenta: tuple
    sheet: int = 1
    flip: int = 1
    aux_x: complex | float | None = None

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "momenta", tuple(self.momenta))

    @property
    def is_complex(self) -> bool:
        vals = (*self.coords, *self.momenta)
        return any(isinstance(v, complex) or np.iscomplexobj(v) for v in vals)

    def as_array(self) -> np.ndarray:
        return np.array([*self.coords, *self.momenta])


@dataclass(frozen=True)
class RegionLabel:
    quadrant: str  # "I".."IV" or "boundary"
    sheet: int
    side: str  # "schwarzschild" | "anti-schwarzschild"


# ---------------------------------------------------------------------------
# scalar helpers that work for float and complex arguments


def _cx(*vals) -> bool:
    return any(isinstance(v, complex) for v in vals)


def _exp(a):
    return cmath.exp(a) if isinstance(a, complex) else math.exp(a)


def _sqrt(a):
    if isinstance(a, complex):
        return cmath.sqrt(a)
    if a < 0:
        raise OverlapError("square root of a negative number on the real slice")
    return math.sqrt(a)


def _log_abs(a):
    """log|a| on the real slice, principal log in complex mode."""
    if isinstance(a, complex):
        return cmath.log(a)
    if a == 0:
        raise OverlapError("logarithm of zero")
    return math.log(abs(a))


def _sign(a) -> int:
    if isinstance(a, complex):
        return 1 if a.real >= 0 else -1
    return 1 if a >= 0 else -1


def Q(w):
    """Q(w) = w^3/2 - w/6 - 1/27 = (w - 2/3)(w + 1/3)^2 / 2."""
    return w**3 / 2.0 - w / 6.0 - 1.0 / 27.0


def dQ(w):
    return 1.5 * w**2 - 1.0 / 6.0


def _ks_x(state: CotangentState):
    if state.aux_x is not None:
        return state.aux_x
    p, q = state.coords
    if _cx(p, q):
        raise ValidityError("complex KS state needs aux_x")
    pq = p * q
    if pq <= -math.exp(-1.0):
        raise ValidityError("KS point at or beyond the singularity pq = -1/e")
    return state.sheet * math.sqrt(1.0 + lambert_w(pq))


# ---------------------------------------------------------------------------
# validity


def is_valid(state: CotangentState) -> bool:
    try:
        _check_valid(state)
    except ValidityError:
        return False
    return True


def _check_valid(state: CotangentState) -> None:
    c1, c2 = state.coords
    ch = state.chart
    vals = (*state.coords, *state.momenta)
    if not all(np.isfinite(v) for v in vals):
        raise ValidityError(f"non-finite component in {ch.value} state")
    if ch is Chart.SCHW:
        if c2 == 0 or c2 == 1:
            raise ValidityError("SCHW requires r not in {0, 1}")
    elif ch is Chart.KS:
        if _ks_x(state) == 0:
            raise ValidityError("KS requires x != 0")
    elif ch is Chart.XT:
        if c2 * c2 == 1:
            raise ValidityError("XT requires x^2 != 1")
    elif ch in (Chart.XP, Chart.XQ, Chart.YP, Chart.YQ):
        if c1 == 0:
            raise ValidityError(f"{ch.value} requires a nonzero null coordinate")


# ---------------------------------------------------------------------------
# metrics and Hamiltonians


def metric(state: CotangentState) -> np.ndarray:
    """Components g_ab of the string metric in the state's chart."""
    c1, c2 = state.coords
    ch = state.chart
    if ch is Chart.SCHW:
        r = c2
        return np.array([[(r - 1) / r**3, 0], [0, -1 / (r * (r - 1))]])
    if ch in (Chart.EF_ADV, Chart.EF_RET):
        return np.array([[-2 * Q(c2), 1], [1, 0]])
    if ch is Chart.KS:
        x = _ks_x(state)
        g = -2.0 / (x**6 * _exp(x * x - 1))
        return np.array([[0, g], [g, 0]])
    if ch in (Chart.XU, Chart.XV):
        x = c2
        return np.array([[(x * x - 1) / x**6, -2 / x**3], [-2 / x**3, 0]])
    if ch is Chart.XT:
        x = c2
        return np.array([[(x * x - 1) / x**6, 0], [0, -4 / (x * x - 1)]])
    if ch in (Chart.XP, Chart.XQ):
        p, x = c1, c2
        return np.array(
            [[4 * (x * x - 1) / (x**6 * p * p), -4 / (x**3 * p)], [-4 / (x**3 * p), 0]]
        )
    if ch in (Chart.YP, Chart.YQ):
        p, y = c1, c2
        return np.array([[4 * (y * y - y**3) / (p * p), 2 / p], [2 / p, 0]])
    raise ValueError(ch)


def hamiltonian_uniform(state: CotangentState):
    """H = (1/2) g^{ab} m_a m_b from the metric components."""
    _check_valid(state)
    g = metric(state)
    m = np.array(state.momenta)
    val = 0.5 * m @ np.linalg.solve(g, m)
    return complex(val) if np.iscomplexobj(val) else float(val)


def hamiltonian(state: CotangentState):
    """Closed-form string Hamiltonian in the state's chart."""
    _check_valid(state)
    c1, c2 = state.coords
    m1, m2 = state.momenta
    ch = state.chart
    if ch is Chart.SCHW:
        r = c2
        return 0.5 * (r**3 * m1 * m1 / (r - 1) - r * (r - 1) * m2 * m2)
    if ch in (Chart.EF_ADV, Chart.EF_RET):
        return m2 * (m1 + Q(c2) * m2)
    if ch is Chart.KS:
        x = _ks_x(state)
        return -(x**6) * _exp(x * x - 1) * m1 * m2 / 2
    if ch in (Chart.XU, Chart.XV):
        x = c2
        return (1 - x * x) * m2 * m2 / 8 - x**3 * m1 * m2 / 2
    if ch is Chart.XT:
        x = c2
        return (4 * x**6 * m1 * m1 - (x * x - 1) ** 2 * m2 * m2) / (8 * (x * x - 1))
    if ch in (Chart.XP, Chart.XQ):
        p, x = c1, c2
        return m2 / 8 * ((1 - x * x) * m2 - 2 * p * x**3 * m1)
    if ch in (Chart.YP, Chart.YQ):
        p, y = c1, c2
        return p * m1 * m2 / 2 - (y * y - y**3) * m2 * m2 / 2
    raise ValueError(ch)


def vector_field(state: CotangentState) -> tuple:
    """Hamilton's equations (dc1, dc2, dm1, dm2)/ds with dc/ds = dH/dm."""
    _check_valid(state)
    c1, c2 = state.coords
    m1, m2 = state.momenta
    ch = state.chart
    if ch in (Chart.EF_ADV, Chart.EF_RET):
        w = c2
        return (m2, m1 + 2 * Q(w) * m2, 0.0 * m1, -dQ(w) * m2 * m2)
    if ch in (Chart.XU, Chart.XV):
        x = c2
        return (
            -(x**3) * m2 / 2,
            (1 - x * x) * m2 / 4 - x**3 * m1 / 2,
            0.0 * m1,
            x * m2 * m2 / 4 + 1.5 * x * x * m1 * m2,
        )
    if ch is Chart.KS:
        p, q = c1, c2
        x = _ks_x(state)
        r = x * x
        f = r**3 * _exp(r - 1)
        k = m1 * m2 * r * (r + 3) / 2
        return (-f * m2 / 2, -f * m1 / 2, k * q, k * p)
    if ch in (Chart.XP, Chart.XQ):
        p, x = c1, c2
        return (
            -p * x**3 * m2 / 4,
            (1 - x * x) * m2 / 4 - p * x**3 * m1 / 4,
            x**3 * m1 * m2 / 4,
            x * m2 * m2 / 4 + 0.75 * p * x * x * m1 * m2,
        )
    raise NotImplementedError(f"no closed-form vector field for {ch.value}")


# ---------------------------------------------------------------------------
# transition maps
#
# Each edge A -> B supplies the forward position map and the Jacobian
# J = d(B coords)/d(A coords) evaluated at the A point; momenta follow
# m_A = J^T m_B.  ``shift`` is 0 for u = t + r + ln|r - 1| and 1 for the
# literal variant u = t + r - 1 + ln|r - 1|; p = exp((u + shift - 1)/2) either way.


def _fwd_schw_ef(st, shift, retarded):
    t, r = st.coords
    if r == 0 or r == 1:
        raise OverlapError("SCHW point on r = 0 or the horizon")
    rs = r + _log_abs(r - 1)
    nul = (-t if retarded else t) + rs - shift
    w = 1 / r - 1 / 3
    flip = st.flip
    if retarded and not _cx(r):
        flip = st.flip * _sign(r - 1)
    J = [[-1 if retarded else 1, r / (r - 1)], [0, -1 / (r * r)]]
    return (nul, w), dict(flip=flip), J


def _inv_schw_ef(st, shift, retarded):
    nul, w = st.coords
    if w + 1 / 3 == 0:
        raise OverlapError("scri is outside SCHW")
    r = 1 / (w + 1 / 3)
    if r == 1:
        raise OverlapError("horizon is outside SCHW")
    rs = r + _log_abs(r - 1)
    t = (rs - shift - nul) if retarded else (nul + shift - rs)
    flip = st.flip
    if retarded and not _cx(r):
        flip = st.flip * _sign(r - 1)
    return (t, r), dict(flip=flip)


def _fwd_ef_x(st, shift):
    nul, w = st.coords
    a = w + 1 / 3
    if a == 0:
        raise OverlapError("scri is outside the x charts")
    x = st.sheet / _sqrt(a)
    return (nul, x), {}, [[1, 0], [0, -(x**3) / 2]]


def _inv_ef_x(st, shift):
    nul, x = st.coords
    if x == 0:
        raise OverlapError("x = 0 is outside the r-based charts")
    return (nul, 1 / (x * x) - 1 / 3), dict(sheet=_sign(x))


def _fwd_nul_exp(st, shift):
    nul, c2 = st.coords
    p = st.flip * _exp((nul + shift - 1) / 2)
    return (p, c2), {}, [[p / 2, 0], [0, 1]]


def _inv_nul_exp(st, shift):
    p, c2 = st.coords
    if p == 0:
        raise OverlapError("null coordinate is infinite at p = 0")
    s = _sign(p)
    return (2 * _log_abs(p * s) + 1 - shift, c2), dict(flip=s)


def _fwd_ef_y(st, shift):
    (p, w), lab, J = _fwd_nul_exp(st, shift)
    return (p, w + 1 / 3), lab, J


def _inv_ef_y(st, shift):
    (nul, y), lab = _inv_nul_exp(st, shift)
    return (nul, y - 1 / 3), lab


def _fwd_x_ks(st, shift, q_side):
    a, x = st.coords
    if a == 0:
        raise OverlapError("null coordinate vanishes")
    e = _exp(x * x - 1)
    b = (x * x - 1) * e / a
    d = 2 * x**3 * e / a
    if q_side:
        J = [[-b / a, d], [1, 0]]
        coords = (b, a)
    else:
        J = [[1, 0], [-b / a, d]]
        coords = (a, b)
    return coords, dict(aux_x=x if _cx(x) else None, sheet=_sign(x)), J


def _inv_x_ks(st, shift, q_side):
    p, q = st.coords
    x = _ks_x(st)
    a = q if q_side else p
    if a == 0:
        raise OverlapError("null coordinate vanishes")
    return (a, x), dict(aux_x=None, sheet=_sign(x))


def _fwd_schw_xt(st, shift):
    t, r = st.coords
    x = st.sheet * _sqrt(r)
    if x == 0:
        raise OverlapError("r = 0")
    return (t, x), {}, [[1, 0], [0, 1 / (2 * x)]]


def _inv_schw_xt(st, shift):
    t, x = st.coords
    return (t, x * x), dict(sheet=_sign(x))


def _fwd_xt_x(st, shift, retarded):
    t, x = st.coords
    x2 = x * x
    if x2 == 1:
        raise OverlapError("horizon is outside XT")
    rs = x2 + _log_abs(x2 - 1)
    nul = (-t if retarded else t) + rs - shift
    flip = st.flip
    if retarded and not _cx(x):
        flip = st.flip * _sign(x2 - 1)
    return (nul, x), dict(flip=flip), [[-1 if retarded else 1, 2 * x**3 / (x2 - 1)], [0, 1]]


def _inv_xt_x(st, shift, retarded):
    nul, x = st.coords
    x2 = x * x
    if x2 == 1:
        raise OverlapError("horizon is outside XT")
    rs = x2 + _log_abs(x2 - 1)
    t = (rs - shift - nul) if retarded else (nul + shift - rs)
    flip = st.flip
    if retarded and not _cx(x):
        flip = st.flip * _sign(x2 - 1)
    return (t, x), dict(flip=flip)


def _fwd_adv_ret_ef(st, shift):
    u, w = st.coords
    if w + 1 / 3 == 0:
        raise OverlapError("u and v are not both finite at scri")
    r = 1 / (w + 1 / 3)
    if r == 1:
        raise OverlapError("u and v are not both finite on the horizon")
    rs = r + _log_abs(r - 1)
    v = 2 * rs - 2 * shift - u
    flip = st.flip * _sign(r - 1) if not _cx(r) else st.flip
    return (v, w), dict(flip=flip), [[-1, -2 * r**3 / (r - 1)], [0, 1]]


def _fwd_adv_ret_x(st, shift):
    u, x = st.coords
    x2 = x * x
    if x2 == 1:
        raise OverlapError("u and v are not both finite on the horizon")
    rs = x2 + _log_abs(x2 - 1)
    v = 2 * rs - 2 * shift - u
    flip = st.flip * _sign(x2 - 1) if not _cx(x) else st.flip
    return (v, x), dict(flip=flip), [[-1, 4 * x**3 / (x2 - 1)], [0, 1]]


def _involution(fwd):
    """Inverse of a self-inverse edge (u <-> v swaps)."""

    def inv(st, shift):
        coords, lab, _ = fwd(st, shift)
        return coords, lab

    return inv


def _p(f, *args):
    return lambda st, shift: f(st, shift, *args)


# (source, target) -> (forward map with Jacobian, inverse map)
_EDGES = {
    (Chart.SCHW, Chart.EF_ADV): (_p(_fwd_schw_ef, False), _p(_inv_schw_ef, False)),
    (Chart.SCHW, Chart.EF_RET): (_p(_fwd_schw_ef, True), _p(_inv_schw_ef, True)),
    (Chart.EF_ADV, Chart.XU): (_fwd_ef_x, _inv_ef_x),
    (Chart.EF_RET, Chart.XV): (_fwd_ef_x, _inv_ef_x),
    (Chart.EF_ADV, Chart.YP): (_fwd_ef_y, _inv_ef_y),
    (Chart.EF_RET, Chart.YQ): (_fwd_ef_y, _inv_ef_y),
    (Chart.XU, Chart.XP): (_fwd_nul_exp, _inv_nul_exp),
    (Chart.XV, Chart.XQ): (_fwd_nul_exp, _inv_nul_exp),
    (Chart.XP, Chart.KS): (_p(_fwd_x_ks, False), _p(_inv_x_ks, False)),
    (Chart.XQ, Chart.KS): (_p(_fwd_x_ks, True), _p(_inv_x_ks, True)),
    (Chart.SCHW, Chart.XT): (_fwd_schw_xt, _inv_schw_xt),
    (Chart.XT, Chart.XU): (_p(_fwd_xt_x, False), _p(_inv_xt_x, False)),
    (Chart.XT, Chart.XV): (_p(_fwd_xt_x, True), _p(_inv_xt_x, True)),
    (Chart.EF_ADV, Chart.EF_RET): (_fwd_adv_ret_ef, _involution(_fwd_adv_ret_ef)),
    (Chart.XU, Chart.XV): (_fwd_adv_ret_x, _involution(_fwd_adv_ret_x)),
}

_NEIGHBOURS: dict[Chart, list[tuple[Chart, bool]]] = {c: [] for c in Chart}
for (_a, _b) in _EDGES:
    _NEIGHBOURS[_a].append((_b, True))
    _NEIGHBOURS[_b].append((_a, False))


def _solve_transpose(J, m):
    (a, b), (c, d) = J
    det = a * d - b * c
    if det == 0 or not np.isfinite(det):
        raise OverlapError("degenerate transition Jacobian")
    # J^T = [[a, c], [b, d]]
    return ((d * m[0] - c * m[1]) / det, (-b * m[0] + a * m[1]) / det)


def _step(st: CotangentState, target: Chart, forward: bool, shift: float) -> CotangentState:
    if forward:
        fwd, _ = _EDGES[(st.chart, target)]
        coords, lab, J = fwd(st, shift)
        mom = _solve_transpose(J, st.momenta)
    else:
        fwd, inv = _EDGES[(target, st.chart)]
        coords, lab = inv(st, shift)
        back = replace(st, chart=target, coords=coords, momenta=(0.0, 0.0), **lab)
        _, _, J = fwd(back, shift)
        (a, b), (c, d) = J
        m = st.momenta
        mom = (a * m[0] + c * m[1], b * m[0] + d * m[1])
    new = replace(st, chart=target, coords=coords, momenta=mom, **lab)
    if target is not Chart.KS and new.aux_x is not None:
        new = replace(new, aux_x=None)
    return new


def to_chart(
    state: CotangentState, target: Chart | str, literal_u_offset: bool = False
) -> CotangentState:
    """Express a cotangent state in another chart.

    Positions follow the coordinate relations, momenta the pullback of the
    canonical one-form.  Raises OverlapError if no chain of overlapping
    charts reaches the target.
    """
    target = Chart(target)
    _check_valid(state)
    if state.chart is target:
        return state
    shift = 1.0 if literal_u_offset else 0.0
    seen = {state.chart}
    queue = deque([state])
    while queue:
        cur = queue.popleft()
        for nxt, forward in _NEIGHBOURS[cur.chart]:
            if nxt in seen:
                continue
            try:
                cand = _step(cur, nxt, forward, shift)
                _check_valid(cand)
            except (OverlapError, ValidityError, ZeroDivisionError, OverflowError, ValueError):
                continue
            if nxt is target:
                return cand
            seen.add(nxt)
            queue.append(cand)
    raise OverlapError(f"{state.chart.value} point is not in the domain of {target.value}")


# ---------------------------------------------------------------------------
# surface and regions


def surface_residual(p, q, x, tangent=None):
    """(pq - (x^2-1)e^(x^2-1), q dp + p dq - 2x^3 e^(x^2-1) dx) for tangent (dp, dq, dx)."""
    e = _exp(x * x - 1)
    r1 = p * q - (x * x - 1) * e
    if tangent is None:
        return r1, 0.0
    dp, dq, dx = tangent
    return r1, q * dp + p * dq - 2 * x**3 * e * dx


def _radius(state: CotangentState):
    c1, c2 = state.coords
    ch = state.chart
    if ch is Chart.SCHW:
        return c2
    if ch in (Chart.EF_ADV, Chart.EF_RET):
        return math.inf if c2 + 1 / 3 == 0 else 1 / (c2 + 1 / 3)
    if ch in (Chart.XU, Chart.XV, Chart.XT, Chart.XP, Chart.XQ):
        return c2 * c2
    if ch in (Chart.YP, Chart.YQ):
        return math.inf if c2 == 0 else 1 / c2
    return _ks_x(state) ** 2


def omega_of(state: CotangentState) -> float:
    """w = 1/r - 1/3 of a state in any chart (inf at r = 0)."""
    r = _radius(state)
    if r == 0:
        return math.inf
    return 1 / r - 1 / 3


def classify_region(state: CotangentState) -> RegionLabel:
    """Kruskal quadrant, sheet and side (Schwarzschild or its continuation past scri)."""
    if state.is_complex:
        raise ValueError("regions are defined on the real slice only")
    ch = state.chart
    c1, c2 = state.coords
    r = _radius(state)
    side = "anti-schwarzschild" if r < 0 else "schwarzschild"
    sheet = state.sheet
    if ch in (Chart.XU, Chart.XV, Chart.XT, Chart.XP, Chart.XQ):
        sheet = 0 if c2 == 0 else _sign(c2)
    elif ch is Chart.KS:
        try:
            sheet = _sign(_ks_x(state))
        except ValidityError:
            sheet = 0
    # sign of pq; the continuation past scri keeps the sign of the exterior
    rel = 0 if r == 1 else (1 if (r > 1 or r < 0 or r == math.inf) else -1)
    if ch is Chart.KS:
        sp, sq = np.sign(c1), np.sign(c2)
    elif ch in (Chart.XP, Chart.YP):
        sp = np.sign(c1)
        sq = sp * rel
    elif ch in (Chart.XQ, Chart.YQ):
        sq = np.sign(c1)
        sp = sq * rel
    elif ch in V_FAMILY:
        sq = state.flip
        sp = sq * rel
    else:
        sp = state.flip
        sq = sp * rel
    if sp == 0 or sq == 0 or sheet == 0:
        return RegionLabel("boundary", int(sheet), side)
    quadrant = {(1, 1): "I", (1, -1): "II", (-1, -1): "III", (-1, 1): "IV"}[(int(sp), int(sq))]
    return RegionLabel(quadrant, int(sheet), side)

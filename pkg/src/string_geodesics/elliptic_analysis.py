"""The elliptic curve of a string geodesic and the genus-two sextic.

With z = s sqrt(H/2) the coordinate w = 1/r - 1/3 is a Weierstrass function
of z.  This module classifies the curve, splits the real w-axis into
segments, computes the residues of du at the two poles of the momentum
(closed form and by contour quadrature) and checks the u-period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .special_functions import (
    CubicRootSet,
    DegenerateError,
    DomainError,
    PeriodLattice,
    WeierstrassInvariants,
    cubic_roots,
    half_periods,
    weierstrass_p,
    weierstrass_p_inverse,
)

__all__ = [
    "EllipticCurveData",
    "Segment",
    "SegmentTable",
    "PoleResidue",
    "ResidueReport",
    "SexticData",
    "CorrespondenceReport",
    "BranchError",
    "MismatchError",
    "SCRI",
    "HORIZON",
    "curve_from_invariants",
    "discriminant_formula",
    "segments",
    "momentum_on_curve",
    "du_residues",
    "u_period_check",
    "sextic_from_invariants",
    "cubic_sextic_correspondence",
    "weierstrass_fit",
]

SCRI = -1.0 / 3.0
HORIZON = 2.0 / 3.0
LANDMARKS = {"scri": SCRI, "horizon": HORIZON, "singularity": math.inf}

# contour radius as a fraction of the shortest lattice vector
CONTOUR_FRACTION = 1e-2
CONTOUR_NODES = 256


class BranchError(ValueError):
    pass


class MismatchError(AssertionError):
    pass


@dataclass(frozen=True)
class EllipticCurveData:
    H: float
    U: float
    inv: WeierstrassInvariants
    roots: CubicRootSet
    lattice: PeriodLattice | None
    case: str  # "case1_pos" | "case2_neg" | "degenerate"

    @property
    def landmarks(self) -> dict:
        return dict(LANDMARKS)

    @property
    def discriminant(self) -> float:
        """16 (g2^3 - 27 g3^2)."""
        return self.roots.discriminant


def discriminant_formula(H: float, U: float) -> float:
    """64 U^2 (8H - 27U^2) / H^2, the closed form of 16 (g2^3 - 27 g3^2)."""
    return 64.0 * U * U * (8.0 * H - 27.0 * U * U) / (H * H)


def curve_from_invariants(H: float, U: float) -> EllipticCurveData:
    if not H > 0:
        raise DomainError(f"the curve is built for H > 0, got {H!r}")
    inv = WeierstrassInvariants(4.0 / 3.0, (8.0 * H - 54.0 * U * U) / (27.0 * H))
    roots = cubic_roots(inv)
    if U == 0 or 8.0 * H == 27.0 * U * U or roots.degenerate:
        return EllipticCurveData(H, U, inv, roots, None, "degenerate")
    case = "case1_pos" if discriminant_formula(H, U) > 0 else "case2_neg"
    return EllipticCurveData(H, U, inv, roots, half_periods(inv), case)


def _require_generic(curve: EllipticCurveData) -> None:
    if curve.case == "degenerate":
        raise DegenerateError(f"degenerate curve for H={curve.H!r}, U={curve.U!r}")


# ---------------------------------------------------------------------------
# segments


@dataclass(frozen=True)
class Segment:
    label: str
    interval: tuple
    parameter: str  # "real" | "imaginary"
    landmarks: tuple

    def contains(self, w: float) -> bool:
        lo, hi = self.interval
        return lo < w < hi


@dataclass(frozen=True)
class SegmentTable:
    case: str
    segments: dict

    def __getitem__(self, label: str) -> Segment:
        return self.segments[label]

    def locate(self, w: float) -> str | None:
        for label, seg in self.segments.items():
            if seg.contains(w):
                return label
        return None


def _segment(label, lo, hi, parameter):
    marks = tuple(
        name for name, w in LANDMARKS.items()
        if (lo < w < hi) or (w == math.inf and hi == math.inf)
    )
    return Segment(label, (lo, hi), parameter, marks)


def segments(curve: EllipticCurveData) -> SegmentTable:
    """Split the real w-axis at the real roots of q.

    Segments where q > 0 carry real parameter z (real velocity); the others
    carry imaginary z.
    """
    _require_generic(curve)
    e = curve.roots
    inf = math.inf
    if curve.case == "case1_pos":
        e1, e2, e3 = e.e1.real, e.e2.real, e.e3.real
        table = {
            "A": _segment("A", -inf, e1, "imaginary"),
            "B": _segment("B", e1, e2, "real"),
            "C": _segment("C", e2, e3, "imaginary"),
            "D": _segment("D", e3, inf, "real"),
        }
    else:
        e1 = e.e1.real
        table = {
            "A": _segment("A", -inf, e1, "imaginary"),
            "D": _segment("D", e1, inf, "real"),
        }
    return SegmentTable(curve.case, table)


# ---------------------------------------------------------------------------
# residues of du


def momentum_on_curve(z, curve: EllipticCurveData, epsilon: int):
    """W at parameter z on branch epsilon: 2H / (U - epsilon sqrt(H/2) p'(z))."""
    _, dp = weierstrass_p(z, curve.inv, lattice=curve.lattice)
    return 2.0 * curve.H / (curve.U - epsilon * math.sqrt(curve.H / 2.0) * dp)


@dataclass(frozen=True)
class PoleResidue:
    z: complex
    w: float
    order: int
    residue: complex  # of W dz, from the derivatives of p at the pole
    closed_form: float  # +-sqrt(2H)
    contour: complex  # trapezoidal quadrature on a small circle


@dataclass(frozen=True)
class ResidueReport:
    epsilon: int
    single_pole: PoleResidue
    double_pole: PoleResidue
    du_residues: tuple  # (at the single pole, at the double pole)
    contour_radius: float

    @property
    def total(self) -> complex:
        return self.single_pole.residue + self.double_pole.residue


def _pole(curve: EllipticCurveData, w: float, epsilon: int) -> complex:
    """z with p(z) = w and p'(z) = epsilon U sqrt(2/H)."""
    target = epsilon * curve.U * math.sqrt(2.0 / curve.H)
    z = weierstrass_p_inverse(w, curve.inv)
    _, dp = weierstrass_p(z, curve.inv, lattice=curve.lattice)
    if abs(dp + target) < abs(dp - target):
        z = -z
        dp = -dp
    if abs(dp - target) > 1e-8 * (1.0 + abs(target)):
        raise BranchError(f"p'(z) = {dp!r} at the pole does not match the branch value {target!r}")
    return z


def _contour(curve, z0, radius, epsilon, nodes=CONTOUR_NODES):
    """(1 / 2 pi i) times the loop integral of W dz around z0."""
    t = 2.0 * np.pi * np.arange(nodes) / nodes
    pts = z0 + radius * np.exp(1j * t)
    vals = np.array([momentum_on_curve(p, curve, epsilon) for p in pts])
    # dz = i (z - z0) dt
    return complex(np.mean(vals * (pts - z0)))


def du_residues(
    curve: EllipticCurveData,
    epsilon: int = 1,
    radius_fraction: float = CONTOUR_FRACTION,
    nodes: int = CONTOUR_NODES,
) -> ResidueReport:
    """Residues of W dz at its poles w = 2/3 (simple) and w = -1/3 (double).

    With D(z) = U - epsilon sqrt(H/2) p'(z), the simple-pole residue is
    2H / D', and the double-pole residue is -4H D''' / (3 D''^2).  Both are
    cross-checked by quadrature on circles.  du = sqrt(2/H) W dz gives the
    du residues.
    """
    _require_generic(curve)
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    H, U = curve.H, curve.U
    c = -epsilon * math.sqrt(H / 2.0)

    z1 = _pole(curve, HORIZON, epsilon)
    z2 = _pole(curve, SCRI, epsilon)
    radius = radius_fraction * curve.lattice.shortest
    p1, dp1 = weierstrass_p(z1, curve.inv, lattice=curve.lattice)
    d1 = c * (6.0 * p1 * p1 - curve.inv.g2 / 2.0)
    res1 = 2.0 * H / d1

    p2, dp2 = weierstrass_p(z2, curve.inv, lattice=curve.lattice)
    # p''' = 12 p p', p'''' = 12 p'^2 + 12 p p''
    d2 = c * 12.0 * p2 * dp2
    d3 = c * (12.0 * dp2 * dp2 + 12.0 * p2 * (6.0 * p2 * p2 - curve.inv.g2 / 2.0))
    res2 = -4.0 * H * d3 / (3.0 * d2 * d2)

    closed = epsilon * math.sqrt(2.0 * H)
    single = PoleResidue(z1, HORIZON, 1, complex(res1), -closed, _contour(curve, z1, radius, epsilon, nodes))
    double = PoleResidue(z2, SCRI, 2, complex(res2), closed, _contour(curve, z2, radius, epsilon, nodes))
    scale = math.sqrt(2.0 / H)
    return ResidueReport(epsilon, single, double, (scale * single.residue, scale * double.residue), radius)


def u_period_check(curve: EllipticCurveData, epsilon: int = 1, enclose: str = "single", nodes: int = CONTOUR_NODES):
    """Change of u around a loop enclosing the single pole, the double pole or both.

    Returns (period, relative error of exp(u/2) after the loop).
    """
    _require_generic(curve)
    rep = du_residues(curve, epsilon, nodes=nodes)
    scale = math.sqrt(2.0 / curve.H)
    period = 0j
    if enclose in ("single", "both"):
        period += 2j * math.pi * scale * _contour(curve, rep.single_pole.z, rep.contour_radius, epsilon, nodes)
    if enclose in ("double", "both"):
        period += 2j * math.pi * scale * _contour(curve, rep.double_pole.z, rep.contour_radius, epsilon, nodes)
    if enclose not in ("single", "double", "both"):
        raise ValueError(f"unknown loop {enclose!r}")
    start = np.exp(0.25 + 0.5j)
    end = start * np.exp(period / 2.0)
    return complex(period), float(abs(end - start) / abs(start))


# ---------------------------------------------------------------------------
# the sextic S(x) = U^2 x^6 - 2H x^2 + 2H


@dataclass(frozen=True)
class SexticData:
    H: float
    U: float
    coefficients: tuple  # highest degree first
    roots: tuple
    distinct: bool
    paired: bool

    def __call__(self, x):
        return np.polyval(self.coefficients, x)


def _polish(coeffs, x, steps=4):
    d = np.polyder(coeffs)
    for _ in range(steps):
        dx = np.polyval(d, x)
        if dx == 0:
            break
        x = x - np.polyval(coeffs, x) / dx
    return complex(x)


def sextic_from_invariants(H: float, U: float, tol: float = 1e-6) -> SexticData:
    coeffs = np.array([U * U, 0.0, 0.0, 0.0, -2.0 * H, 0.0, 2.0 * H])
    roots = [_polish(np.trim_zeros(coeffs, "f"), r) for r in np.roots(coeffs)]
    roots.sort(key=lambda z: (round(z.real, 12), round(z.imag, 12)))
    scale = max(1.0, max((abs(r) for r in roots), default=1.0))
    gaps = [abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:]]
    distinct = len(roots) == 6 and min(gaps) > tol * scale
    paired = all(min(abs(r + other) for other in roots) <= tol * scale for r in roots)
    return SexticData(float(H), float(U), tuple(coeffs), tuple(roots), bool(distinct), bool(paired))


@dataclass(frozen=True)
class CorrespondenceReport:
    identity_residual: float  # max relative |H x^6 q(x^-2 - 1/3) - 2 S(x)|
    root_distance: float  # max distance from a sextic root to the nearest +-(e + 1/3)^(-1/2)
    cubic_residual: float  # max |q(x^-2 - 1/3)| over the sextic roots


def cubic_sextic_correspondence(
    curve: EllipticCurveData,
    sextic: SexticData,
    n_points: int = 100,
    seed: int = 0,
    rtol: float = 1e-10,
) -> CorrespondenceReport:
    """Check that w = x^-2 - 1/3 carries the cubic onto the sextic."""
    _require_generic(curve)
    if not sextic.distinct:
        raise DegenerateError("the sextic has repeated roots")
    if (curve.H, curve.U) != (sextic.H, sextic.U):
        raise ValueError("curve and sextic belong to different (H, U)")
    H = curve.H
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n_points) + 1j * rng.normal(size=n_points)
    lhs = H * x**6 * curve.inv.q(x**-2 - 1.0 / 3.0)
    rhs = 2.0 * sextic(x)
    ident = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))

    expected = []
    for e in curve.roots.roots:
        a = complex(e + 1.0 / 3.0) ** -0.5
        expected += [a, -a]
    expected = np.array(expected)
    dist = max(float(np.min(np.abs(expected - r))) for r in sextic.roots)
    cub = max(abs(curve.inv.q(complex(r) ** -2 - 1.0 / 3.0)) for r in sextic.roots)
    report = CorrespondenceReport(ident, dist, float(cub))
    if ident > rtol or dist > 1e-8 * max(1.0, float(np.max(np.abs(expected)))):
        raise MismatchError(f"cubic and sextic disagree: {report}")
    return report


# ---------------------------------------------------------------------------
# comparison with an integrated trajectory


def weierstrass_fit(s, w, curve: EllipticCurveData, s_turn: float):
    """Fit w(s) = Re p(s sqrt(H/2) - z0) to samples on segment B.

    Motion on B runs along the line Im z = Im omega3, where p is real and
    sweeps [e1, e2] once per real period, reaching e2 at omega1 + omega3.
    The e2 turning point at s_turn fixes z0, which is then
    refined by a least-squares shift along the real axis.  Returns
    (z0, max |deviation|).
    """
    _require_generic(curve)
    if curve.case != "case1_pos":
        raise ValueError("the fit is set up for the bounded segment of case 1")
    lat = curve.lattice
    k = math.sqrt(curve.H / 2.0)
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    base = s_turn * k - lat.omega1 - lat.omega3

    def model(shift):
        z0 = base + shift
        return np.array([weierstrass_p(si * k - z0, curve.inv, lattice=lat)[0].real for si in s])

    def cost(shift):
        return float(np.sum((model(shift) - w) ** 2))

    width = 1e-4 * abs(lat.omega1)
    res = minimize_scalar(cost, bounds=(-width, width), method="bounded", options={"xatol": 1e-14})
    shift = float(res.x) if res.fun < cost(0.0) else 0.0
    dev = float(np.max(np.abs(model(shift) - w)))
    return complex(base + shift), dev
